"""Long-time 1+1 evolution of single spherical modes.

The hot loop lives in a compiled extension; a numpy implementation with the
same interface is used when the extension is missing or when
``LOCALDECAY_PURE_PYTHON=1`` is set before import.
"""

from ._backend import BACKEND, get_backend
from .analysis import (ConeProfile, ConvergenceStudy, DecayFit, cone_profile,
                       convergence_study, detect_tail_window,
                       fit_decay, local_log_derivative)
from .core import (EvolutionConfig, EvolutionResult, WaveState, bump_profile, energy,
                   evolve, gaussian_data, gaussian_profile, initial_data,
                   observer_stencil, quadrature_weights)
from .io import read_series, read_snapshots, write_series, write_snapshots

__all__ = [
    "BACKEND", "get_backend", "ConeProfile", "ConvergenceStudy", "DecayFit", "cone_profile",
    "convergence_study",
    "detect_tail_window", "fit_decay", "local_log_derivative", "EvolutionConfig",
    "EvolutionResult", "WaveState", "bump_profile", "energy", "evolve", "gaussian_data",
    "gaussian_profile", "initial_data", "observer_stencil", "quadrature_weights",
    "read_series", "read_snapshots", "write_series", "write_snapshots",
]
