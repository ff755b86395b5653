"""Latent-variable Gaussian processes for mixed quantitative and qualitative inputs."""

__version__ = "0.1.0"

from .domain import Dataset, InputSpace, QualVar, QuantVar, ValidationError, read_csv, stratified_doe
from .kernel import HyperParams, SingularCovarianceError
from .latent import RepresentativeLatent, export_latents, representative_latent
from .model import LVGP, FitSettings
from .priors import PriorSpec

__all__ = [
    "Dataset", "FitSettings", "HyperParams", "InputSpace", "LVGP", "PriorSpec", "QualVar", "QuantVar",
    "RepresentativeLatent", "SingularCovarianceError", "ValidationError", "__version__", "export_latents",
    "read_csv", "representative_latent", "stratified_doe",
]
