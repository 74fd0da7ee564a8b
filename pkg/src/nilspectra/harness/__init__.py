"""Declarative experiments, constant fitting and the command-line entry point."""

from .config import ExperimentConfig, build_model, load_config, parse_config
from .experiments import (
    EquivalenceReport,
    run_count_experiment,
    run_heat_experiment,
    run_sobolev_check,
    run_sweep,
    run_volume,
    write_report,
)
from .fitting import fit_constant
