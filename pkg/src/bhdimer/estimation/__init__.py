"""Forward models and estimators for measured quantities."""

from .cumulants import (
    CumulantTable,
    QuadratureSamples,
    cumulants_to_moments,
    estimate_cumulants,
    moments_to_cumulants,
    sample_gaussian_output,
)
from .lorentzian import LorentzianFit, fit_lorentzian, lorentzian
from .reflection import FitResult, ReflectionTrace, fit_reflection, reflection_model

__all__ = [
    "CumulantTable", "QuadratureSamples", "cumulants_to_moments", "estimate_cumulants",
    "moments_to_cumulants", "sample_gaussian_output", "LorentzianFit", "fit_lorentzian",
    "lorentzian", "FitResult", "ReflectionTrace", "fit_reflection", "reflection_model",
]
