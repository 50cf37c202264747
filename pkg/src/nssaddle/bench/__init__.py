"""Experiment harness: configs, grid runs, slope fits, plots and the acceptance suite."""

from .config import ConfigError, ExperimentConfig, ProblemSpec
from .fit import SlopeFit, SlopeUndefined, fit_slope
from .runner import run_experiment

__all__ = ["ConfigError", "ExperimentConfig", "ProblemSpec", "SlopeFit", "SlopeUndefined", "fit_slope",
           "run_experiment"]
