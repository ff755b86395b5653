"""Point estimation, posterior sampling and predictive mixtures."""

from .diagnostics import ess, identified_scalars, split_rhat
from .nuts import NonFiniteGradientError, NutsConfig, run_chain
from .optimize import FitError, MapConfig, MapFitResult, RestartTrace, fit_map, maximize
from .parallel import available_cores, run_tasks
from .predictive import (
    PredictiveMixture,
    gaussian_interval,
    order_statistic_indices,
    prediction_interval,
    predictive_mixture,
)
from .sampling import PosteriorSamples, SamplerConfig, SamplerWarning, sample_posterior
from .sparse_fit import SparseMapConfig, fit_sparse_map, sample_sparse_posterior, sparse_layout
from .targets import FreeView, PosteriorTarget, SparseJointTarget, sample_prior_unconstrained, theta_bounds

__all__ = [
    "FitError", "FreeView", "MapConfig", "MapFitResult", "NonFiniteGradientError", "NutsConfig",
    "PosteriorSamples", "PosteriorTarget", "PredictiveMixture", "RestartTrace", "SamplerConfig",
    "SamplerWarning", "SparseJointTarget", "SparseMapConfig", "fit_sparse_map",
    "sample_sparse_posterior", "sparse_layout", "available_cores", "ess", "fit_map", "gaussian_interval",
    "identified_scalars", "maximize", "order_statistic_indices", "prediction_interval",
    "predictive_mixture", "run_chain", "run_tasks", "sample_posterior", "sample_prior_unconstrained",
    "split_rhat", "theta_bounds",
]
