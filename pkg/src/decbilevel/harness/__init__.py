"""Experiment orchestration: config parsing, runs, sweeps, validation, CLI."""

from decbilevel.harness.config import ConfigError, ExperimentConfig, parse_config
from decbilevel.harness.runner import run_experiment, sweep
from decbilevel.harness.checks import validate

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "run_experiment",
    "sweep",
    "validate",
]
