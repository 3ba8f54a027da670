"""Frequency-domain solves: Jost solutions, R_tau g, monitors and small-tau structure."""

from .apply import (RadiationCheck, ResolventSolution, energy_bound, radiation_check,
                    radiation_curve, residual, resolvent_apply, resolvent_apply_batch,
                    shell_residuals)
from .jost import (BatchSolution, JostData, jost_solutions, outgoing_seed, solve_batch,
                   source_function, spectral_point, wronskian_on_axis)
from .lowfreq import (DEFAULT_SWEEP, LowFreqExpansion, ZeroResolventExpansion, shell_moments,
                      low_freq_expansion, zero_resolvent, zero_solve)
from .monitors import (BoundTable, PointwiseBound, bound_state_probe, le_tau_bound_monitor,
                       pointwise_bound_monitor, pointwise_sweep)

__all__ = [
    "BatchSolution", "BoundTable", "JostData", "LowFreqExpansion", "PointwiseBound",
    "RadiationCheck", "ResolventSolution", "ZeroResolventExpansion", "DEFAULT_SWEEP",
    "bound_state_probe", "energy_bound", "jost_solutions", "le_tau_bound_monitor",
    "low_freq_expansion", "outgoing_seed", "pointwise_bound_monitor", "pointwise_sweep",
    "radiation_check", "radiation_curve", "residual", "resolvent_apply",
    "resolvent_apply_batch", "shell_moments", "solve_batch", "source_function",
    "spectral_point", "wronskian_on_axis", "zero_resolvent", "zero_solve",
]
