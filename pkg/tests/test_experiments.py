import csv
from dataclasses import replace

import numpy as np

from quasimild.harness import ExperimentConfig
from quasimild.harness.config import parse_config_text
from quasimild.harness.experiments import EXIT_OK, run_experiment

SMALL = """experiment.kind = equivalence
grid.N = 8
mesh.T = 0.1
mesh.K = 64
noise.M = 3
noise.n_seeds = 3
"""


def _rows(path):
    with open(path) as fh:
        return [r for r in csv.DictReader(line for line in fh if not line.startswith("#"))]


def test_small_equivalence_is_reproducible(tmp_path):
    cfg = parse_config_text(SMALL)
    a = run_experiment(cfg).write(tmp_path / "a")
    b = run_experiment(cfg).write(tmp_path / "b")
    for name in ("metrics.csv", "refinement.csv", "checks.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rows = _rows(a / "metrics.csv")
    assert [int(r["seed"]) for r in rows] == [0, 1, 2]


def test_parallel_matches_serial(tmp_path):
    cfg = parse_config_text(SMALL)
    a = run_experiment(cfg).write(tmp_path / "serial")
    b = run_experiment(replace(cfg, workers=2)).write(tmp_path / "parallel")
    assert (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()


def test_zero_noise_gives_zero_metrics(tmp_path):
    cfg = parse_config_text(SMALL + "noise.c0 = 0.0\n")
    report = run_experiment(cfg)
    assert report.exit_code == EXIT_OK
    for row in report.rows:
        assert row["gap_supL2"] == 0.0
        assert row["weak_res_static"] == 0.0 and row["mild_res"] == 0.0


def test_batteries_pass():
    for kind in ("identities", "audit", "oracle"):
        report = run_experiment(replace(ExperimentConfig(), kind=kind))
        failed = [c.name for c in report.checks if not c.passed]
        assert not failed, failed
