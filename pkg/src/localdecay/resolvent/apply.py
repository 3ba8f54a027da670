"""Applying the outgoing resolvent to gridded sources and checking the result."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .._fd import diff_uniform
from ..errors import IngoingContamination
from ..geometry import ModePotential, RadialGrid
from ..norms import DyadicPartition, GriddedField, le_dual_norm
from .jost import SEED_TOL, solve_batch, source_function, spectral_point


@dataclass
class ResolventSolution:
    """v = R_tau g on the grid of the source.

    ``dv_plus`` holds (d_x + i tau) v, assembled from the stripped Jost
    functions so that it carries no cancellation error in the far field.
    """

    tau: complex
    grid: RadialGrid
    v: np.ndarray
    dv: np.ndarray
    dv_plus: np.ndarray
    wronskian: complex
    drift: float
    source: GriddedField
    match_radius: float
    seed_error: float
    radiation_residuals: dict = field(default_factory=dict)

    @property
    def field(self) -> GriddedField:
        return GriddedField(self.v, self.grid, tau=self.tau)


def shell_residuals(dv_plus: np.ndarray, part: DyadicPartition) -> dict[int, float]:
    """k -> 2^(-k/2) ||(d_x + i tau) v||_{L^2(A_k, dx)} on every shell."""
    sq = part.shell_sq(np.asarray(dv_plus))
    return {k: 2.0 ** (-k / 2) * math.sqrt(val) for k, val in sq.items()}


def _solution(pot, tau, g, b, i, s=0):
    part = DyadicPartition(g.grid, warn=False)
    return ResolventSolution(
        tau=complex(b.taus[i]), grid=g.grid, v=b.v[s, i], dv=b.dv[s, i],
        dv_plus=b.dv_plus[s, i], wronskian=complex(b.wronskian[i]), drift=float(b.drift[i]),
        source=g, match_radius=b.match_radius, seed_error=float(b.seed_error[i]),
        radiation_residuals=shell_residuals(b.dv_plus[s, i], part))


def resolvent_apply_batch(pot: ModePotential, taus: Sequence[complex], g: GriddedField,
                          tol: float = SEED_TOL, batch: int = 12,
                          check_resonance: bool = True) -> list[ResolventSolution]:
    """Outgoing solutions of (d_x^2 - V + tau^2) v = g for several tau.

    ``g`` holds the mode-field source on its grid; the solution is returned
    on the same grid.
    """
    taus = [spectral_point(t) for t in np.atleast_1d(taus)]
    gfun, sup = source_function(np.asarray(g.values), g.grid.x)
    if sup[1] <= sup[0]:
        zero = np.zeros(g.grid.n, complex)
        part = DyadicPartition(g.grid, warn=False)
        out = []
        for t in taus:
            sol = solve_batch(pot, [t], [], [], g.grid.x, tol=tol)
            out.append(ResolventSolution(
                tau=t, grid=g.grid, v=zero.copy(), dv=zero.copy(), dv_plus=zero.copy(),
                wronskian=complex(sol.wronskian[0]), drift=float(sol.drift[0]), source=g,
                match_radius=sol.match_radius, seed_error=float(sol.seed_error[0]),
                radiation_residuals=shell_residuals(zero, part)))
        return out
    b = solve_batch(pot, taus, [gfun], [sup], g.grid.x, batch=batch, tol=tol,
                    check_resonance=check_resonance)
    return [_solution(pot, t, g, b, i) for i, t in enumerate(taus)]


def resolvent_apply(pot: ModePotential, tau, g: GriddedField, **kw) -> ResolventSolution:
    """v = R_tau g by variation of parameters with the two Jost solutions.

    v(x) = [psi_out(x) int_left^x psi_in g + psi_in(x) int_x^inf psi_out g] / W.
    Raises ResonanceSuspected when the Wronskian is numerically zero.
    """
    return resolvent_apply_batch(pot, [tau], g, **kw)[0]


def residual(sol: ResolventSolution, pot: ModePotential, accuracy: int = 6) -> float:
    """||P_tau v - g||_{LE*} / ||g||_{LE*} with v'' from differencing dv."""
    grid = sol.grid
    d2 = diff_uniform(sol.dv, grid.h, 1, accuracy)
    r = d2 - np.asarray(pot(grid.x)) * sol.v + sol.tau ** 2 * sol.v - np.asarray(sol.source.values)
    part = DyadicPartition(grid, warn=False)
    gn = le_dual_norm(sol.source, part)
    rn = le_dual_norm(GriddedField(r, grid), part)
    return rn / gn if gn > 0 else rn


def energy_bound(sol: ResolventSolution) -> tuple[float, float]:
    """(||v||, ||g|| / (|tau| |Im tau|)) in L^2(dx) over the grid.

    For V >= 0 and Im tau < 0 the first never exceeds the second: pairing
    P_tau v = g with v gives |tau^2 - lambda| >= |tau| |Im tau| on the
    spectrum lambda >= 0 of -d_x^2 + V.
    """
    h = sol.grid.h
    vn = math.sqrt(h * float(np.sum(np.abs(sol.v) ** 2)))
    gn = math.sqrt(h * float(np.sum(np.abs(np.asarray(sol.source.values)) ** 2)))
    b = abs(sol.tau.imag)
    return vn, (gn / (abs(sol.tau) * b) if b > 0 else math.inf)


@dataclass(frozen=True)
class RadiationCheck:
    tau: complex
    shells: np.ndarray
    residuals: np.ndarray
    ratios: np.ndarray
    passed: bool

    def table(self) -> str:
        rows = ["# k residual ratio_to_previous"]
        prev = None
        for k, v in zip(self.shells, self.residuals):
            rat = "" if prev is None or v == 0 else f"{prev / v:.4g}"
            rows.append(f"{k:d} {v:.6e} {rat}")
            prev = v
        return "\n".join(rows) + "\n"


def radiation_check(sol: ResolventSolution, last: int = 4, factor: float = 2.0,
                    min_beyond: int = 8, plateau: float = 0.9, strict: bool = True
                    ) -> RadiationCheck:
    """Residual curve k -> 2^(-k/2) ||(d_x + i tau) v||_{L^2(A_k)} on complete shells.

    Passes when the residual drops by at least ``factor`` between each of
    the last ``last`` shells, or sits at roundoff. A curve whose consecutive ratio stays above
    ``plateau`` (no decay) means the ingoing branch was picked up and raises
    IngoingContamination when ``strict``.
    """
    grid = sol.grid
    part = DyadicPartition(grid, warn=False)
    x0, x1 = grid.x[0], grid.x[-1]
    ks = [k for k, a, b in part.shells if a > x0 and b < x1 and k in part.ks]
    nz = np.flatnonzero(np.asarray(sol.source.values) != 0)
    if len(nz):
        r_sup = grid.r[nz[-1]]
        k_sup = int(math.floor(math.log2(math.sqrt(r_sup * r_sup + 4.0))))
        beyond = [k for k in ks if k > k_sup]
        if len(beyond) < min(min_beyond, last + 1):
            raise ValueError(f"only {len(beyond)} complete shells beyond the source support")
        ks = beyond
    res = sol.radiation_residuals or shell_residuals(sol.dv_plus, part)
    vals = np.array([res[k] for k in ks])
    # a shell residual at roundoff (exactly outgoing, e.g. flat l = 0 beyond
    # the source) satisfies the condition outright
    floor = 1e-12 * float(np.max(np.abs(sol.v)))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(vals[1:] <= floor, np.inf, vals[:-1] / vals[1:])
    tail = ratios[-(last - 1):] if last > 1 else ratios
    passed = bool(len(tail) and np.all(tail >= factor))
    if strict and len(tail) and np.all(1.0 / tail > plateau):
        raise IngoingContamination(
            f"shell residuals plateau at {vals[-1]:.3e} (ratios {np.round(tail, 3)})")
    return RadiationCheck(tau=sol.tau, shells=np.array(ks), residuals=vals,
                          ratios=ratios, passed=passed)


def radiation_curve(values, grid: RadialGrid, tau) -> dict[int, float]:
    """Shell residuals of an arbitrary sampled mode field (derivative by differencing)."""
    values = np.asarray(values)
    dvp = diff_uniform(values, grid.h, 1, 6) + 1j * complex(tau) * values
    return shell_residuals(dvp, DyadicPartition(grid, warn=False))
