"""Experiment harness: metrics, Monte-Carlo runs, export and CLI."""

from .experiment import (
    BASELINE,
    EKF,
    ExperimentConfig,
    ExperimentResult,
    FilterConfig,
    run_experiment,
    run_sequence,
)
from .export import export
from .metrics import rot_error, trans_error
