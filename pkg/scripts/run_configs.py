"""Run every config in ``configs/`` (or the ones named) and print one status line each.

    python scripts/run_configs.py [--out results] [name ...]
"""

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

from quasimild.harness.config import load_config
from quasimild.harness.experiments import run_experiment

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("names", nargs="*", help="config names without .cfg (default: all)")
    p.add_argument("--out", default=str(ROOT / "results"))
    args = p.parse_args(argv)
    paths = [ROOT / "configs" / f"{n}.cfg" for n in args.names] or sorted((ROOT / "configs").glob("*.cfg"))
    worst = 0
    for path in paths:
        cfg = replace(load_config(path), out=str(Path(args.out) / path.stem))
        start = time.perf_counter()
        report = run_experiment(cfg)
        report.write(cfg.out)
        n_pass = sum(c.passed for c in report.checks)
        print(f"{path.stem:<20} exit {report.exit_code}  {n_pass}/{len(report.checks)} checks  "
              f"{time.perf_counter() - start:7.1f} s  -> {cfg.out}")
        worst = max(worst, report.exit_code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
