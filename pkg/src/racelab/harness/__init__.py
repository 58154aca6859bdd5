"""Experiment configuration, lap trials, controller comparison and the CLI."""

from racelab.harness.config import ConfigError, ExperimentConfig
from racelab.harness.trial import (LapReport, compare_controllers, localization_run, run_trial,
                                   sweep_speed_scale)

__all__ = ["ConfigError", "ExperimentConfig", "LapReport", "compare_controllers",
           "localization_run", "run_trial", "sweep_speed_scale"]
