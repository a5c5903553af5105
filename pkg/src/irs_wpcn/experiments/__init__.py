"""Scenario configuration, Monte-Carlo sweeps and the command-line tool."""

from .config import DESK_SCALE, PRESETS, SWEEPS, GeometryConfig, ScenarioConfig, SweepConfig, default_config, load_config, parse_quantity, resolve
from .runner import COLUMNS, SCHEMA_VERSION, Summary, large_scale_gain, read_results, run_experiment, run_trial, summarize, sweep_points, trial_seed

__all__ = [
    "COLUMNS",
    "DESK_SCALE",
    "GeometryConfig",
    "PRESETS",
    "SCHEMA_VERSION",
    "SWEEPS",
    "ScenarioConfig",
    "Summary",
    "SweepConfig",
    "default_config",
    "large_scale_gain",
    "load_config",
    "parse_quantity",
    "read_results",
    "resolve",
    "run_experiment",
    "run_trial",
    "summarize",
    "sweep_points",
    "trial_seed",
]
