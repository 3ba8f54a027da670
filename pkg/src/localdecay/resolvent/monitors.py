"""Uniform-bound monitors for resolvent sweeps.

The ratio ||R_tau g||_{LE_tau} / ||g||_{LE*} stays bounded as tau approaches
the real axis exactly when the operator has no eigenvalue or zero
resonance. A negative eigenvalue -kappa^2 of -d_x^2 + V shows up as a pole
of the resolvent at tau = -i kappa; the monitor probes the negative
imaginary axis for sign changes of the (real) Wronskian there.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from ..errors import ResonanceSuspected
from ..geometry import ModePotential, RadialGrid, bracket
from ..norms import DyadicPartition, GriddedField, le_dual_norm, le_tau_norm
from .apply import resolvent_apply_batch
from .jost import wronskian_on_axis


@dataclass
class BoundTable:
    """Ratios ||R_tau g||_{LE_tau} / ||g||_{LE*} over a frequency sweep."""

    taus: np.ndarray
    ratios: np.ndarray
    median: float
    flagged: np.ndarray                     # taus whose ratio exceeds threshold * median
    bound_states: list = field(default_factory=list)   # kappa with -kappa^2 an eigenvalue
    threshold: float = 10.0

    @property
    def variation(self) -> float:
        r = self.ratios[np.isfinite(self.ratios)]
        return float(r.max() / r.min()) if len(r) else np.inf

    @property
    def ok(self) -> bool:
        return not len(self.flagged) and not self.bound_states

    def table(self) -> str:
        rows = ["# re_tau im_tau ratio flag"]
        for t, r in zip(self.taus, self.ratios):
            flag = int(t in self.flagged)
            rows.append(f"{t.real:.10e} {t.imag:.10e} {r:.6e} {flag}")
        for k in self.bound_states:
            rows.append(f"# bound state at tau = -{k:.8f}i (eigenvalue {-k * k:.8f})")
        return "\n".join(rows) + "\n"


def bound_state_probe(pot: ModePotential, s_max: float = 4.0, n: int = 40,
                      s_min: float = 0.02) -> list[float]:
    """kappa > 0 with -kappa^2 an eigenvalue, from sign changes of W(-i s).

    The axis Wronskian is real and does not vanish for s > 0 unless a bound
    state sits there; each bracketing pair is refined with Brent's method.
    """
    s = np.geomspace(s_min, s_max, n)
    w = np.array([wronskian_on_axis(pot, si) for si in s])
    roots = []
    for a, b, wa, wb in zip(s[:-1], s[1:], w[:-1], w[1:]):
        if np.sign(wa) != np.sign(wb):
            roots.append(brentq(lambda z: wronskian_on_axis(pot, z), a, b, xtol=1e-10))
    return sorted(roots, reverse=True)


def restrict(f: GriddedField, r_min: float) -> GriddedField:
    """The part of a field with areal radius >= r_min."""
    grid = f.grid
    keep = grid.r >= r_min
    sub = RadialGrid(x=grid.x[keep], r=grid.r[keep], drdx=grid.drdx[keep], h=grid.h,
                     ell=grid.ell, staggered=grid.staggered and bool(keep[0]))
    return GriddedField(np.asarray(f.values)[..., keep], sub, f.dt, f.tau)


def default_r_min(pot: ModePotential) -> float:
    # r-derivatives of horizon-going waves grow like 1/(1 - 2M/r); the norms
    # are taken where that factor is at most 5
    return 2.5 * pot.mass if pot.left == "horizon" and pot.mass > 0 else 0.0


def le_tau_bound_monitor(pot: ModePotential, tau_grid: Sequence[complex], g: GriddedField,
                         m: int = 0, threshold: float = 10.0, probe: bool = True,
                         s_max: float = 4.0, modulate: bool = False,
                         r_min: float | None = None) -> BoundTable:
    """Ratio table over ``tau_grid``; flags ratios above ``threshold`` x median.

    With ``modulate`` the source at frequency tau is g exp(-i tau x), which
    drives the outgoing branch resonantly and realizes the size of the
    bound; a fixed smooth g instead gives ratios decaying like 1/|tau| at high
    frequency. Norms are evaluated where r >= ``r_min``.

    With ``probe`` the negative imaginary axis is scanned for eigenvalues;
    each one found adds the point tau = -i kappa (1 + 1e-6) to the table, where
    the ratio is large if and only if the pole is genuine.
    """
    taus = np.array([complex(t) for t in tau_grid])
    if np.any(np.abs(taus) < 1e-4):
        raise ValueError("tau_grid must stay at least 1e-4 away from tau = 0")
    r_min = default_r_min(pot) if r_min is None else r_min
    kappas = bound_state_probe(pot, s_max=s_max) if probe else []
    probes = np.array([-1j * k * (1 + 1e-6) for k in kappas], dtype=complex)
    gr = restrict(g, r_min)
    part = DyadicPartition(gr.grid, warn=False)
    gn = le_dual_norm(gr, part, m)

    def ratio(t):
        src = g
        if modulate:
            src = GriddedField(np.asarray(g.values) * np.exp(-1j * t.real * g.grid.x), g.grid)
        try:
            s = resolvent_apply_batch(pot, [t], src)[0]
        except ResonanceSuspected:
            return np.inf
        return le_tau_norm(restrict(s.field, r_min), t, m, part) / gn

    if modulate:
        ratios = [ratio(t) for t in taus]
    else:
        sols = resolvent_apply_batch(pot, taus, g)
        ratios = [le_tau_norm(restrict(s.field, r_min), s.tau, m, part) / gn for s in sols]
    ratios += [ratio(t) for t in probes]
    ratios = np.array(ratios)
    all_taus = np.concatenate([taus, probes])
    med = float(np.median(ratios[: len(taus)]))
    big = ~np.isfinite(ratios) | (ratios > threshold * med)
    big[len(taus):] = True      # probe points sit on verified poles
    flag = all_taus[big]
    return BoundTable(taus=all_taus, ratios=ratios, median=med, flagged=flag,
                      bound_states=list(kappas), threshold=threshold)


@dataclass(frozen=True)
class PointwiseBound:
    """sup over the grid of |u| times the regime weight."""

    tau: complex
    regime: str          # "high" (weight <r>) or "low" (weight max(1, |tau| <r>))
    sup: float
    r_at_sup: float
    r: np.ndarray
    weighted: np.ndarray


def pointwise_bound_monitor(pot: ModePotential, tau, sol, r_min: float = 0.0) -> PointwiseBound:
    """Weighted sup of the profile u = v / r of a resolvent solution.

    Weight <r> for |tau| >= 1 and max(1, |tau| <r>) for |tau| < 1; both
    keep the weighted profile of an outgoing solution bounded uniformly in
    tau. Points with r < ``r_min`` are skipped.
    """
    tau = complex(tau)
    grid = sol.grid
    u = np.abs(sol.field.u)
    br = bracket(grid.r)
    if abs(tau) >= 1.0:
        regime, w = "high", br
    else:
        regime, w = "low", np.maximum(1.0, abs(tau) * br)
    keep = grid.r >= r_min
    wu = (u * w)[keep]
    i = int(np.argmax(wu))
    return PointwiseBound(tau=tau, regime=regime, sup=float(wu[i]),
                          r_at_sup=float(grid.r[keep][i]), r=grid.r[keep], weighted=wu)


def pointwise_sweep(pot: ModePotential, taus, g: GriddedField, r_min: float = 0.0
                    ) -> tuple[list[PointwiseBound], float]:
    """Monitor over a sweep; returns the entries and max/min of their sups."""
    sols = resolvent_apply_batch(pot, taus, g)
    rows = [pointwise_bound_monitor(pot, s.tau, s, r_min) for s in sols]
    sups = np.array([p.sup for p in rows])
    return rows, float(sups.max() / sups.min())
