"""Sweeps over link and receiver parameters with deterministic seeding."""

from .config import ConfigError, ExperimentConfig, SweepPoint, expand_points, load_config
from .emit import emit, format_ber, load_json
from .runner import ResultRecord, run_point, run_sweep, simulate_link

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "SweepPoint",
    "ResultRecord",
    "expand_points",
    "load_config",
    "simulate_link",
    "run_point",
    "run_sweep",
    "emit",
    "format_ber",
    "load_json",
]
