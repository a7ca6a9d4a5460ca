"""Experiment configuration, runners and the command-line entry point."""

from .config import ExperimentConfig, ExperimentKind, load_config, parse_config_text
from .experiments import (ExperimentReport, run_assumption_audit, run_convergence, run_equivalence,
                          run_experiment, run_identity_suite, run_oracle_sanity)
