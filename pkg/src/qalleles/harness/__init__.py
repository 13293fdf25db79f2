"""Configuration, presets, runs, sweeps and the command-line front end."""

from .config import RunConfig, load, resolve
from .runner import SweepSpec, check_hypotheses, run_single, run_sweep, simulate
from .rng import SplitMix64

__all__ = ["RunConfig", "load", "resolve", "SweepSpec", "check_hypotheses",
           "run_single", "run_sweep", "simulate", "SplitMix64"]
