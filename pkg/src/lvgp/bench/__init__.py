"""Engineering test functions, metrics, Sobol indices and the replication harness."""

from .experiment import ExperimentConfig, ExperimentReport, parse_method, replicate_seeds, run_experiment
from .functions import (
    DomainError,
    TestFunction,
    borehole,
    discretize,
    get_function,
    otl,
    otl_vb1,
    piston,
    sample_inputs,
)
from .metrics import coverage, interval_score, mis, rrmse
from .sobol import total_sobol
from .synthetic import draw_responses, qualitative_space, random_theta

__all__ = [
    "DomainError", "ExperimentConfig", "ExperimentReport", "TestFunction", "borehole", "coverage",
    "discretize", "draw_responses", "get_function", "interval_score", "mis", "otl", "otl_vb1",
    "parse_method", "piston", "qualitative_space", "random_theta", "replicate_seeds", "rrmse",
    "run_experiment", "sample_inputs", "total_sobol",
]
