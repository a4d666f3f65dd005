"""Seeded Monte Carlo experiments and the ``csdoa`` command line."""

from .config import ExperimentConfig, load_config, parse_config, preset, serialize_config
from .experiments import (
    SweepResult,
    SweepRow,
    run_deviation_sweep,
    run_example1,
    run_lemma_check,
    run_rmse_sweep,
    run_timing,
)

__all__ = [
    "ExperimentConfig",
    "SweepResult",
    "SweepRow",
    "load_config",
    "parse_config",
    "preset",
    "serialize_config",
    "run_deviation_sweep",
    "run_example1",
    "run_lemma_check",
    "run_rmse_sweep",
    "run_timing",
]
