import numpy as np
import pytest

from quasimild import ConfigurationError, __version__
from quasimild.harness import ExperimentConfig
from quasimild.harness.cli import main, parse_seed_range
from quasimild.harness.config import ExperimentKind, config_to_text, load_config, parse_config_text


def test_defaults_round_trip():
    cfg = ExperimentConfig()
    assert parse_config_text(config_to_text(cfg)) == cfg


def test_parse_types_and_comments():
    cfg = parse_config_text("experiment.kind = audit  # comment\nmesh.K = 64\nnoise.c0 = 0.1\n"
                            "solver.include_drift = false\n")
    assert cfg.kind is ExperimentKind.ASSUMPTION_AUDIT
    assert cfg.mesh.K == 64 and cfg.noise.c0 == 0.1 and cfg.solver.include_drift is False


@pytest.mark.parametrize("text", ["mesh.bogus = 1", "nothing = 2", "mesh.K = 1.5", "mesh.K 3",
                                  "mesh.K = 8\nmesh.K = 16", "experiment.kind = fancy",
                                  "solver.theta = 2", "experiment.levels = 0", "mesh.K = 6"])
def test_parse_errors(text):
    with pytest.raises(ConfigurationError):
        parse_config_text(text)


def test_validate_rejects_bad_models():
    with pytest.raises(ConfigurationError):
        parse_config_text("model.gamma1 = 3").validate()
    with pytest.raises(ConfigurationError):
        parse_config_text("grid.bc = dirichlet").validate()
    with pytest.raises(ConfigurationError):
        load_config("/nonexistent/file.cfg")


def test_seed_range():
    assert parse_seed_range("3..7") == (3, 7)
    assert parse_seed_range("4") == (4, 4)
    for bad in ("7..3", "a..b", "-1"):
        with pytest.raises(ConfigurationError):
            parse_seed_range(bad)
    assert ExperimentConfig().with_seeds(2, 5).seeds == [2, 3, 4, 5]


def test_cli_version(capsys):
    assert main(["version"]) == 0
    assert capsys.readouterr().out.strip() == __version__


def test_cli_unknown_key_exits_3(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("mesh.bogus = 1\n")
    assert main(["run", "--config", str(cfg)]) == 3
    assert "bogus" in capsys.readouterr().err


def test_cli_parameter_violation_exits_3(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("model.gamma1 = 3.0\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_cli_zero_noise_run(tmp_path, capsys):
    cfg = tmp_path / "z.cfg"
    cfg.write_text("experiment.kind = equivalence\ngrid.N = 8\nmesh.K = 32\nnoise.M = 0\nnoise.n_seeds = 2\n")
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "metrics.csv").is_file() and (out / "report.txt").is_file()
    assert "PASS" in capsys.readouterr().out
