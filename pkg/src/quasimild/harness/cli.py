"""Command-line surface: ``quasimild run|check|identities|convergence|version``."""

from __future__ import annotations

import argparse
import logging
import re
import sys
from dataclasses import replace

from .. import __version__
from ..errors import ConfigurationError
from .config import ExperimentConfig, ExperimentKind, load_config
from .experiments import EXIT_CONFIG, run_experiment

log = logging.getLogger("quasimild")


def parse_seed_range(text: str) -> tuple:
    """``"a..b"`` (inclusive) or a single integer."""
    m = re.fullmatch(r"\s*(\d+)\s*(?:\.\.\s*(\d+)\s*)?", text)
    if not m:
        raise ConfigurationError(f"seed range must look like 'a..b', got {text!r}")
    first = int(m.group(1))
    last = int(m.group(2)) if m.group(2) is not None else first
    if last < first:
        raise ConfigurationError(f"empty seed range {text!r}")
    return first, last


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quasimild", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, default_kind):
        sp.add_argument("--config", help="flat key = value config file")
        sp.add_argument("--out", help="output directory (overrides experiment.out)")
        sp.add_argument("--seeds", help="inclusive seed range a..b")
        sp.add_argument("--threads", type=int, default=None, help="worker processes for seed ensembles")
        sp.set_defaults(default_kind=default_kind)

    common(sub.add_parser("run", help="run the experiment named in the config"), None)
    common(sub.add_parser("check", help="assumption audit"), ExperimentKind.ASSUMPTION_AUDIT)
    common(sub.add_parser("identities", help="identity, evolution-family and fractional batteries"),
           ExperimentKind.IDENTITY_SUITE)
    conv = sub.add_parser("convergence", help="refinement study")
    common(conv, ExperimentKind.CONVERGENCE)
    conv.add_argument("--levels", type=int, default=None, help="refinement levels (overrides the config)")
    sub.add_parser("version", help="print the package version")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.default_kind is not None:
        cfg = replace(cfg, kind=args.default_kind)
    if getattr(args, "levels", None) is not None:
        cfg = replace(cfg, levels=args.levels)
    if args.seeds:
        cfg = cfg.with_seeds(*parse_seed_range(args.seeds))
    if args.out:
        cfg = replace(cfg, out=args.out)
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigurationError("--threads must be at least 1")
        cfg = replace(cfg, workers=args.threads)
    return cfg.validate()


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "version":
        print(__version__)
        return 0
    try:
        cfg = _resolve_config(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("running %s with seeds %s..%s", cfg.kind.value, cfg.seeds[0], cfg.seeds[-1])
    report = run_experiment(cfg)
    out = report.write(cfg.out)
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value:.6g} (want {c.threshold})")
    print(f"results written to {out}")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
