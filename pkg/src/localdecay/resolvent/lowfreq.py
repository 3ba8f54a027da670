"""Zero-frequency resolvent and the low-frequency expansion.

At tau = 0 the outgoing Jost function degenerates (the Wronskian of the
stripped pair behaves like -2 i tau), so the static problem
phi'' - V phi = g is solved with its own pair: the solution decaying at
infinity, seeded from the Frobenius series

    psi_inf = x^p sum_n b_n x^-n,   p (p - 1) = V_2,
    b_n n (n + 1 - 2 p) = sum_{k >= 3} V_k b_{n + 2 - k},

and the regular (or horizon-bounded) solution at the left end. A decaying
branch with the right normalization exists only without a zero resonance;
ZeroResonance reports its absence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from ..errors import SlopeTooShallow, ZeroResonance
from ..geometry import ModePotential, RadialGrid, bracket
from ..norms import DyadicPartition, GriddedField, le_dual_norm
from .jost import (FIT_POWERS, RTOL, local_power_fit, regular_offset, regular_seed,
                   solve_batch, source_function)

ZERO_TOL = 1e-8
NSERIES = 30
# on Schwarzschild M = 1 the lowest quasinormal frequency sits near |tau| = 0.1 and
# bends the remainder curves on the upper part of (0, 0.1]
DEFAULT_SWEEP = np.geomspace(1e-5, 1e-2, 16)


def decaying_series(pot: ModePotential, R: float):
    """psi_inf, psi_inf' and an error estimate at x = R from the local model."""
    vk, misfit = local_power_fit(pot, R)
    vk, misfit = vk[0], float(misfit[0])
    V2 = vk[0]
    if 1.0 + 4.0 * V2 < 0:
        raise ZeroResonance(f"V ~ {V2:.4g} / x^2 with V_2 < -1/4 oscillates at infinity")
    p = 0.5 * (1.0 - math.sqrt(1.0 + 4.0 * V2))
    b = np.zeros(NSERIES + 1)
    b[0] = 1.0
    for n in range(1, NSERIES + 1):
        s = 0.0
        for i, k in enumerate(FIT_POWERS[1:], start=1):
            m = n + 2 - k
            if m >= 0:
                s += vk[i] * b[m]
        b[n] = s / (n * (n + 1 - 2 * p))
    n = np.arange(NSERIES + 1)
    terms = np.abs(b) * R ** (-n.astype(float))
    f = float(np.sum(b * R ** (p - n)))
    fp = float(np.sum((p - n) * b * R ** (p - n - 1)))
    err = float(terms[-1] + misfit * R * R)
    return f, fp, err


@dataclass
class ZeroSolution:
    """Static solutions for several sources on ``x`` plus the Jost pair."""

    x: np.ndarray
    v: np.ndarray        # (source, point)
    dv: np.ndarray
    psi_inf: np.ndarray
    dpsi_inf: np.ndarray
    wronskian: float
    drift: float
    seed_radius: float


def zero_solve(pot: ModePotential, sources, supports, x_eval, R_seed: float | None = None,
               tol: float = 1e-10) -> ZeroSolution:
    """Bounded solutions of phi'' - V phi = g for every source (tau = 0)."""
    x_eval = np.asarray(x_eval, dtype=float)
    S = len(sources)
    regular = pot.left == "regular"
    x_lo, x_hi = float(x_eval[0]), float(x_eval[-1])
    sup_hi = max([s[1] for s in supports], default=x_lo)
    R = max(R_seed or 0.0, 2.0 * x_hi, 2.0 * sup_hi, 50.0)
    while True:
        f0, fp0, err = decaying_series(pot, R)
        if err < tol or R > 1e8:
            break
        R *= 2.0
    x_start = min(x_lo, 1e-3) if regular else min(x_lo, pot.x_min)
    x_stop = min(max(sup_hi, x_lo), x_hi)
    x_chk = np.linspace(max(x_lo, x_start), x_stop, 9) if x_stop > x_lo else np.array([x_lo])
    gs = sources

    def rhs_inf(x, y):
        dy = np.empty_like(y)
        dy[0] = y[1]
        dy[1] = pot(x) * y[0]
        for k in range(S):
            dy[2 + k] = -y[0] * gs[k](x)
        return dy

    pts = np.unique(np.concatenate([x_eval, x_chk]))[::-1]
    scale = abs(f0)
    y0 = np.zeros(2 + S)
    y0[0], y0[1] = f0, fp0
    sol = solve_ivp(rhs_inf, (R, pts[-1]), y0, method="DOP853", t_eval=pts, rtol=RTOL,
                    atol=1e-16 * scale)
    if not sol.success:
        raise RuntimeError(f"decaying sweep failed: {sol.message}")
    xo, Yo = sol.t[::-1], sol.y[:, ::-1]

    def rhs_left(x, y):
        dy = np.empty_like(y)
        dy[0] = y[1]
        dy[1] = pot(x) * y[0]
        for k in range(S):
            dy[2 + k] = y[0] * gs[k](x)
        return dy

    if regular:
        V0 = regular_offset(pot, x_start)
        a0, ap0 = regular_seed(pot.ell, V0, 0.0, x_start)
        y0 = np.zeros(2 + S)
        y0[0], y0[1] = a0.real, ap0.real
        amp = x_start ** (pot.ell + 1)
    else:
        y0 = np.zeros(2 + S)
        y0[0] = 1.0
        amp = 1.0
    pts_in = np.unique(np.concatenate([x_eval[x_eval <= x_stop], x_chk]))
    if pts_in[0] > x_start:
        si = solve_ivp(rhs_left, (x_start, pts_in[-1]), y0, method="DOP853", t_eval=pts_in,
                       rtol=RTOL, atol=1e-16 * amp)
        xi, Yi = si.t, si.y
    else:
        rest = pts_in[1:]
        xi, Yi = np.array([x_start]), y0[:, None]
        if len(rest):
            si = solve_ivp(rhs_left, (x_start, rest[-1]), y0, method="DOP853", t_eval=rest,
                           rtol=RTOL, atol=1e-16 * amp)
            xi = np.concatenate([xi, si.t])
            Yi = np.concatenate([Yi, si.y], axis=1)

    io, ii = np.searchsorted(xo, x_chk), np.searchsorted(xi, x_chk)
    pin, dpin = Yi[0], Yi[1]
    pinf, dpinf = Yo[0], Yo[1]
    Wc = pin[ii] * dpinf[io] - pinf[io] * dpin[ii]
    sc = np.abs(pin[ii] * dpinf[io]) + np.abs(pinf[io] * dpin[ii])
    W = float(Wc[-1])
    if abs(W) < ZERO_TOL * sc[-1]:
        raise ZeroResonance(f"static Wronskian {W:.3e} vanishes: a bounded zero mode exists")
    drift = float(np.max(np.abs(Wc - W)) / abs(W))

    je = np.searchsorted(xo, x_eval)
    inside = x_eval <= x_stop
    ke = np.searchsorted(xi, x_eval[inside])
    J = Yo[2:, je]
    K = np.empty((S, len(x_eval)))
    P, dP = np.zeros(len(x_eval)), np.zeros(len(x_eval))
    if S:
        K[:, inside] = Yi[2:, ke]
        K[:, ~inside] = Yi[2:, -1:]
    P[inside], dP[inside] = pin[ke], dpin[ke]
    v = (pinf[je][None] * K + P[None] * J) / W
    dv = (dpinf[je][None] * K + dP[None] * J) / W
    return ZeroSolution(x=x_eval, v=v, dv=dv, psi_inf=pinf[je], dpsi_inf=dpinf[je],
                        wronskian=W, drift=drift, seed_radius=R)


@dataclass
class ZeroResolventExpansion:
    """R_0 g with its far-field coefficients.

    For l = 0 the profile u = v / r behaves like c <r>^-1 + e(r) <r>^-2; for
    l = 1 like d (-r / <r>^3) + e(r) <r>^-2 (coefficient of the zonal
    harmonic, so d is the dipole moment along the axis). ``multipole`` is
    the limit of v r^l for any l. ``c_from_moments`` and ``d_from_moments``
    are the flat-space predictions -sum c_m / 4 pi and sum d_m / 4 pi.
    """

    ell: int
    v: GriddedField
    c: float
    d: float
    multipole: float
    far_r: np.ndarray
    c_profile: np.ndarray
    c_drift: float
    e: np.ndarray
    e_sup: float
    v2_remainder: np.ndarray
    moment_table: list = field(default_factory=list)   # (k, c_k, d_k)
    c_from_moments: float = 0.0
    d_from_moments: float = 0.0
    c_bound_ratio: float = 0.0
    wronskian: float = 0.0
    drift: float = 0.0

    def table(self) -> str:
        rows = ["# k c_k d_k"] + [f"{k:d} {ck:.10e} {dk:.10e}" for k, ck, dk in self.moment_table]
        rows.append(f"# c = {self.c:.10e}  d = {self.d:.10e}  multipole = {self.multipole:.10e}")
        rows.append(f"# c-fit drift over the last decade = {self.c_drift:.3e}")
        return "\n".join(rows) + "\n"


def shell_moments(g: GriddedField) -> list[tuple[int, float, float]]:
    """Per-shell c_k = 4 pi int r g dr and d_k = (4 pi / 3) int r^2 g dr."""
    grid = g.grid
    part = DyadicPartition(grid, warn=False)
    vals = np.asarray(g.values).real
    one = np.ones(grid.n)
    ck = part.sesquilinear(4 * np.pi * grid.r * vals * grid.drdx, one)
    dk = part.sesquilinear(4 * np.pi / 3 * grid.r ** 2 * vals * grid.drdx, one)
    return [(k, ck[k].real, dk[k].real) for k in part.ks if ck[k] != 0 or dk[k] != 0]


def far_grid(pot: ModePotential, r_far: float, n: int = 200) -> np.ndarray:
    """Tortoise points whose radii are log-spaced over [r_far / 10, r_far]."""
    from scipy.optimize import brentq
    rs = np.geomspace(r_far / 10, r_far, n)
    xs = []
    for r in rs:
        xs.append(brentq(lambda x: float(pot.r_of_x(np.asarray([x]))[0]) - r,
                         -r, 2 * r + 100, xtol=1e-12))
    return np.array(xs)


def zero_resolvent(pot: ModePotential, g: GriddedField, r_far: float = 1e4,
                   n_far: int = 200) -> ZeroResolventExpansion:
    """R_0 g as the limit of R_{-i eps} g, with its far-field expansion."""
    vals = np.asarray(g.values)
    if np.iscomplexobj(vals):
        vals = vals.real
    grid = g.grid
    gfun, sup = source_function(vals, grid.x)
    srcs, sups = ([gfun], [sup]) if sup[1] > sup[0] else ([], [])
    xf = far_grid(pot, r_far, n_far)
    xf = xf[xf > grid.x[-1]]
    x_all = np.concatenate([grid.x, xf])
    zs = zero_solve(pot, srcs, sups, x_all)
    if not srcs:
        zs.v = np.zeros((1, len(x_all)))
        zs.dv = np.zeros((1, len(x_all)))
    phi, dphi = zs.v[0], zs.dv[0]
    ng = grid.n
    ell = pot.ell

    # far-field coefficient of r^-(l+1) in u, with the 1/<r> correction removed
    xr = x_all[ng:] if len(xf) else grid.x[-len(grid.x) // 4:]
    sel = slice(ng, None) if len(xf) else slice(ng - len(xr), ng)
    r = np.asarray(pot.r_of_x(xr), dtype=float)
    drdx = np.asarray(pot.drdx(xr), dtype=float)
    Q = phi[sel] * r ** ell
    dQdr = dphi[sel] / drdx * r ** ell + ell * phi[sel] * r ** (ell - 1) if ell else dphi[sel] / drdx
    br = bracket(r)
    cprof = Q + br ** 2 / r * dQdr
    a = float(cprof[-1])
    last = r >= r[-1] / 10
    c_drift = float((cprof[last].max() - cprof[last].min()) / abs(a)) if a != 0 else 0.0

    c = a if ell == 0 else 0.0
    d = -a if ell == 1 else 0.0
    u = phi[sel] / r
    if ell == 0:
        model = c / br
    elif ell == 1:
        model = -d * r / br ** 3
    else:
        model = a / r ** (ell + 1)
    e = (u - model) * br ** 2
    e_fit = float(np.mean(e[last]))
    rg = grid.r
    brg = bracket(rg)
    with np.errstate(divide="ignore", invalid="ignore"):
        if ell == 0:
            mg = c / brg
        elif ell == 1:
            mg = -d * rg / brg ** 3
        else:
            mg = np.where(rg > 0, a / np.maximum(rg, 1e-300) ** (ell + 1), 0.0)
    v2 = phi[:ng] - rg * (mg + e_fit / brg ** 2)

    moments = shell_moments(GriddedField(vals, grid)) if srcs else []
    csum = -sum(m[1] for m in moments) / (4 * np.pi)
    dsum = sum(m[2] for m in moments) / (4 * np.pi)
    part = DyadicPartition(grid, warn=False)
    gb = le_dual_norm(GriddedField(vals * bracket(grid.r), grid), part)
    return ZeroResolventExpansion(
        ell=ell, v=GriddedField(phi[:ng], grid, tau=0.0), c=c, d=d, multipole=a, far_r=r,
        c_profile=cprof, c_drift=c_drift, e=e, e_sup=float(np.max(np.abs(e))),
        v2_remainder=v2, moment_table=moments, c_from_moments=csum, d_from_moments=dsum,
        c_bound_ratio=(abs(c) / gb if gb > 0 else 0.0), wronskian=zs.wronskian,
        drift=zs.drift)


@dataclass
class LowFreqExpansion:
    """Measured pieces of R_tau g = (v0 + tau v1 + tau e0) exp(-i tau x) + w2.

    Norms are L^2(dx) over the local region ``x``. ``e0`` holds, per tau,
    tau (alpha + beta log tau) from the fit of the difference quotient, and
    ``w2_norm_e0`` the remainder once tau e0 is removed as well. ``samples``
    keeps R_tau g on the region, one row per tau.
    """

    taus: np.ndarray
    x: np.ndarray
    v0: np.ndarray
    v1: np.ndarray
    e0: np.ndarray
    w1_norm: np.ndarray
    w2_norm: np.ndarray
    w2_norm_e0: np.ndarray
    slope_first: float
    slope_second: float
    slope_second_log: float
    w2_bound: float
    log_coefficient: np.ndarray
    samples: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), complex))

    def table(self) -> str:
        rows = ["# tau ||w1|| ||w2|| ||w2 - tau e0||"]
        for t, a, b, c in zip(self.taus, self.w1_norm, self.w2_norm, self.w2_norm_e0):
            rows.append(f"{t:.8e} {a:.8e} {b:.8e} {c:.8e}")
        rows.append(f"# slope first = {self.slope_first:.4f}  second = {self.slope_second:.4f}"
                    f"  second (log-augmented) = {self.slope_second_log:.4f}")
        return "\n".join(rows) + "\n"


def _slope(t, y):
    return float(np.polyfit(np.log(t), np.log(y), 1)[0])


def low_freq_expansion(pot: ModePotential, g: GriddedField, tau_sweep, r_local: float | None = None,
                       check: bool = True, first_min: float = 0.95, second_min: float = 1.7
                       ) -> LowFreqExpansion:
    """Measure the small-tau structure of R_tau g on a compact region.

    The first-order remainder w1 = R_tau g - exp(-i tau x) R_0 g and the
    second-order one w2 = R_tau g exp(i tau x) - R_0 g - tau v1 are
    compared against tau and tau^2 by log-log regression; v1 is the
    intercept of the difference quotient (R_tau g exp(i tau x) - R_0 g) / tau
    fitted by v1 + tau (alpha + beta log tau). SlopeTooShallow is raised
    when ``check`` and a slope falls below its threshold.
    """
    taus = np.sort(np.asarray(tau_sweep, dtype=float))
    if len(taus) < 12 or taus[0] <= 0 or taus[-1] > 0.1 + 1e-12:
        raise ValueError("tau_sweep needs at least 12 points in (0, 0.1]")
    vals = np.asarray(g.values).real
    grid = g.grid
    gfun, sup = source_function(vals, grid.x)
    if sup[1] <= sup[0]:
        raise ValueError("source vanishes")
    r_sup = float(pot.r_of_x(np.asarray([sup[1]]))[0])
    r_loc = r_local if r_local is not None else r_sup + 10.0
    r_lo = 2.5 * pot.mass if pot.left == "horizon" and pot.mass > 0 else 0.0
    keep = (grid.r <= r_loc) & (grid.r >= r_lo)
    x = grid.x[keep]
    z = zero_solve(pot, [gfun], [sup], x)
    v0 = z.v[0]
    b = solve_batch(pot, taus, [gfun], [sup], x)
    v = b.v[0]
    ph = np.exp(1j * np.outer(taus, x))
    h = grid.h

    def nrm(a):
        return np.sqrt(h * np.sum(np.abs(a) ** 2, axis=-1))

    w1 = v - v0[None] / ph
    n1 = nrm(w1)
    D = (v * ph - v0[None]) / taus[:, None]
    A = np.column_stack([np.ones_like(taus), taus, taus * np.log(taus)])
    coef, *_ = np.linalg.lstsq(A, D, rcond=None)
    v1, alpha, beta = coef
    w2 = v * ph - v0[None] - taus[:, None] * v1[None]
    n2 = nrm(w2)
    e0 = alpha[None] + beta[None] * np.log(taus)[:, None]
    n2e = nrm(w2 - taus[:, None] ** 2 * e0)
    s1 = _slope(taus, n1)
    s2 = _slope(taus, n2)
    s2l = _slope(taus, n2 / np.abs(np.log(taus)))
    out = LowFreqExpansion(taus=taus, x=x, v0=v0, v1=v1, e0=taus[:, None] * e0, w1_norm=n1,
                           w2_norm=n2, w2_norm_e0=n2e, slope_first=s1, slope_second=s2,
                           slope_second_log=s2l, w2_bound=float(np.max(n2 / taus ** 2)),
                           log_coefficient=beta, samples=v)
    if check and (s1 < first_min or s2 < second_min):
        raise SlopeTooShallow(f"remainder slopes {s1:.3f} (first) and {s2:.3f} (second) "
                              f"below {first_min} / {second_min}")
    return out
