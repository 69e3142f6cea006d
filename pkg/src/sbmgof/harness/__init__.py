"""Experiment runner and command-line interface."""

from .config import ExperimentSpec, ModelConfig
from .experiments import (
    run_error_table,
    run_estimate_k,
    run_experiment,
    run_null_distribution,
    run_real_data,
    run_select_k_table,
    run_single_test,
)
