"""Driven-dissipative Bose-Hubbard dimer: steady states, parametric gain, squeezing and estimation."""

from .errors import (
    Ambiguous,
    DimerError,
    FilterOverlap,
    FitDiverged,
    InsufficientSamples,
    MissingMoment,
    NoConvergence,
    PreconditionViolation,
    SingularResolvent,
    SolveFailure,
    TruncationError,
    UnphysicalCovariance,
    UnphysicalRegime,
)
from .model import DimerParams, Drive, dbm_to_flux, drift_matrix, equations_of_motion, flux_to_dbm, ghz, mhz
from .semiclassical import (
    PhaseDiagram,
    SteadyState,
    classify_phase,
    phase_diagram,
    shifted_eigenfrequencies,
    solve_steady_states,
    vanishing_left_locus,
)

__version__ = "0.1.0"

__all__ = [
    "Ambiguous", "DimerError", "FilterOverlap", "FitDiverged", "InsufficientSamples", "MissingMoment",
    "NoConvergence", "PreconditionViolation", "SingularResolvent", "SolveFailure", "TruncationError",
    "UnphysicalCovariance", "UnphysicalRegime", "DimerParams", "Drive", "dbm_to_flux", "drift_matrix",
    "equations_of_motion", "flux_to_dbm", "ghz", "mhz", "PhaseDiagram", "SteadyState", "classify_phase",
    "phase_diagram", "shifted_eigenfrequencies", "solve_steady_states", "vanishing_left_locus", "__version__",
]
