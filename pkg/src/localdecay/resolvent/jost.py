"""Jost solutions and the batched variation-of-parameters engine.

Conventions: the reduced operator is P_tau = d_x^2 - V(x) + tau^2 and the
outgoing branch behaves like exp(-i tau x) as x -> +infinity, so that
(d_x + i tau) psi_out -> 0. The holomorphy half plane is Im tau < 0.

Both Jost functions are integrated in phase-stripped form,

    psi_out = exp(-i tau x) f,   f'' - 2 i tau f' - V f = 0,
    psi_in  = exp(+i tau x) h,   h'' + 2 i tau h' - V h = 0   (horizon end),

which keeps the unknowns slowly varying wherever V is small. At a regular
centre psi_in is the solution vanishing like x^(l+1). The source integrals
needed by variation of parameters are appended to the ODE state, so a
single inward and a single outward sweep produce the solution for several
frequencies and several sources at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from ..errors import MatchRadiusTooSmall, ResonanceSuspected
from ..geometry import ModePotential

RTOL = 1e-12
SEED_TOL = 1e-10
R_CAP = 1e7
RESONANCE_TOL = 1e-8
SUPPORT_CUT = 1e-17


def spectral_point(tau) -> complex:
    """Validate a frequency: Im tau must be <= 0."""
    tau = complex(tau)
    if tau.imag > 1e-14 * max(1.0, abs(tau)):
        raise ValueError(f"Im tau = {tau.imag:g} > 0 lies outside the holomorphy half plane")
    return tau


FIT_RATIOS = np.array([1.0, 1.2, 1.45, 1.75, 2.1, 2.5])
FIT_POWERS = np.arange(2, 8)
_FIT_MATRIX = (1.0 / FIT_RATIOS[:, None]) ** FIT_POWERS[None, :]
_MID_RATIOS = 0.5 * (FIT_RATIOS[1:] + FIT_RATIOS[:-1])
_MID_MATRIX = (1.0 / _MID_RATIOS[:, None]) ** FIT_POWERS[None, :]
NMAX = 40


def local_power_fit(pot: ModePotential, R):
    """Local model V ~ sum_{k=2..7} V_k x^-k on [R, 2.5 R].

    Collocation at six points x = R rho_j; returns the coefficients (one
    row per entry of ``R``) and the largest misfit at the midpoints. Exact
    for potentials that are polynomials in 1/x of degree <= 7.
    """
    R = np.atleast_1d(np.asarray(R, dtype=float))
    xs = R[:, None] * FIT_RATIOS[None, :]
    v = np.asarray(pot(xs.ravel()), dtype=float).reshape(xs.shape)
    c = np.linalg.solve(_FIT_MATRIX, v.T).T          # c_k = V_k R^-k
    vm = np.asarray(pot((R[:, None] * _MID_RATIOS[None, :]).ravel()), dtype=float)
    misfit = np.max(np.abs(vm.reshape(len(R), -1) - c @ _MID_MATRIX.T), axis=1)
    return c * R[:, None] ** FIT_POWERS[None, :], misfit


def outgoing_coefficients(tau: complex, vk: np.ndarray, n: int = NMAX) -> np.ndarray:
    """a_0..a_n of f = sum a_j x^-j solving f'' - 2 i tau f' - V f = 0.

    ``vk`` holds V_2..V_7 along its last axis (leading axes broadcast).
    Recurrence: 2 i tau j a_j = sum_k V_k a_{j+1-k} - j (j - 1) a_{j-1}.
    """
    vk = np.asarray(vk, dtype=float)
    a = np.zeros(vk.shape[:-1] + (n + 1,), dtype=complex)
    a[..., 0] = 1.0
    for j in range(1, n + 1):
        s = -j * (j - 1) * a[..., j - 1]
        for i, k in enumerate(FIT_POWERS):
            m = j + 1 - k
            if m >= 0:
                s = s + vk[..., i] * a[..., m]
        a[..., j] = s / (2j * tau * j)
    return a


def asymptotic_outgoing(pot: ModePotential, tau: complex, x):
    """Optimally truncated series for the stripped outgoing solution at ``x``.

    Returns (f, f', error estimate) arrays. The estimate adds the smallest
    series term and the effect of the local-fit misfit.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    vk, misfit = local_power_fit(pot, x)
    a = outgoing_coefficients(tau, vk)
    n = np.arange(NMAX + 1)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        terms = np.abs(a) * x[:, None] ** (-n[None, :].astype(float))
    terms[:, 0] = np.inf
    # a single vanishing coefficient (V_2 = 0 gives a_1 = 0) must not end the
    # series early, so truncation is judged on the pairwise envelope
    env = np.maximum(terms[:, 1:-1], terms[:, 2:])
    N = np.argmin(env, axis=1) + 1
    err_series = env[np.arange(len(x)), N - 1]
    keep = n[None, :] < N[:, None]
    aa = np.where(keep, a, 0.0)
    xp = x[:, None] ** (-n[None, :].astype(float))
    f = np.sum(aa * xp, axis=1)
    fp = np.sum(-n[None, :] * aa * xp / x[:, None], axis=1)
    err_model = misfit * x * np.minimum(x, 1.0 / abs(tau))
    return f, fp, err_series + err_model


@dataclass(frozen=True)
class OutgoingSeed:
    tau: complex
    R: float
    f: complex
    fp: complex
    error: float

    def values(self) -> tuple[complex, complex]:
        return self.f, self.fp


def outgoing_seed(pot: ModePotential, tau: complex, R_min: float, tol: float = SEED_TOL,
                  R_cap: float = R_CAP) -> OutgoingSeed:
    """Asymptotic seed at the smallest radius R = R_min 2^k meeting ``tol``."""
    tau = complex(tau)
    R = max(float(R_min), 1.0)
    while True:
        f, fp, err = asymptotic_outgoing(pot, tau, R)
        if err[0] < tol:
            return OutgoingSeed(tau, R, complex(f[0]), complex(fp[0]), float(err[0]))
        R *= 2.0
        if R > R_cap:
            raise MatchRadiusTooSmall(
                f"asymptotic series error {err[0]:.2e} > {tol:.0e} at R = {R / 2:.3g} "
                f"(tau = {tau})")


def regular_seed(ell: int, V0: float, tau: complex, x: float) -> tuple[complex, complex]:
    """Frobenius series x^(l+1) sum c_k x^(2k) for V = l(l+1)/x^2 + V0."""
    lam = V0 - tau * tau
    c, f, fp = 1.0 + 0j, 0j, 0j
    for k in range(12):
        if k:
            c = c * lam / ((2 * k) * (2 * k + 2 * ell + 1))
        p = ell + 1 + 2 * k
        f += c * x ** p
        fp += c * p * x ** (p - 1)
    return f, fp


def regular_offset(pot: ModePotential, x: float) -> float:
    """V0 = lim (V - l(l+1)/x^2) estimated at a small x."""
    L = pot.ell * (pot.ell + 1)
    return float(pot(x)) - L / (x * x)


def source_function(values, x, support=None) -> tuple[Callable, tuple[float, float]]:
    """Cubic interpolant of sampled source values, zero outside its support.

    The support is the smallest grid interval containing every sample
    above ``SUPPORT_CUT`` times the peak, unless given.
    """
    values = np.asarray(values)
    x = np.asarray(x, dtype=float)
    # samples below 1e-17 of the peak are treated as outside the support
    nz = np.flatnonzero(np.abs(values) > SUPPORT_CUT * np.max(np.abs(values), initial=0.0))
    if len(nz) == 0:
        return (lambda s: 0.0), (float(x[0]), float(x[0]))
    if support is None:
        i0, i1 = max(nz[0] - 1, 0), min(nz[-1] + 1, len(x) - 1)
        support = (float(x[i0]), float(x[i1]))
    spline = CubicSpline(x, values)
    lo, hi = support

    def g(s):
        if s < lo or s > hi:
            return 0.0
        return complex(spline(s)) if np.iscomplexobj(values) else float(spline(s))

    return g, (lo, hi)


def masked(fun: Callable, support) -> Callable:
    lo, hi = support

    def g(s):
        if s < lo or s > hi:
            return 0.0
        return fun(s)

    return g


def _source_scale(g: Callable, support) -> float:
    """Rough size of int |g|, used for absolute tolerances."""
    lo, hi = support
    xs = np.linspace(lo, hi, 257)
    vals = np.abs([g(x) for x in xs])
    return max(float(np.max(vals)) * max(hi - lo, 1.0), 1e-300)


@dataclass
class BatchSolution:
    """Variation-of-parameters output for a batch of frequencies and sources.

    Arrays are indexed (source, tau, point) except the Jost data, which are
    (tau, point).
    """

    taus: np.ndarray
    x: np.ndarray
    v: np.ndarray
    dv: np.ndarray
    dv_plus: np.ndarray
    wronskian: np.ndarray
    drift: np.ndarray
    match_radius: float
    seed_error: np.ndarray
    psi_out: np.ndarray
    psi_in: np.ndarray


def _group(taus: np.ndarray, size: int) -> list[np.ndarray]:
    order = np.argsort(np.abs(taus), kind="stable")
    return [order[i:i + size] for i in range(0, len(order), size)]


def solve_batch(pot: ModePotential, taus, sources: Sequence[Callable], supports,
                x_eval, batch: int = 12, tol: float = SEED_TOL, R_min: float | None = None,
                full_in: bool = False, check_resonance: bool = True) -> BatchSolution:
    """Outgoing solutions of P_tau v = g for every tau and source.

    Parameters
    ----------
    sources, supports
        Scalar callables g(x) (zero outside their support) and the
        intervals that contain their supports.
    x_eval
        Sorted evaluation points inside [left end, infinity).
    full_in
        Integrate psi_in over every evaluation point (for diagnostics); by
        default it stops at the right edge of the joint source support.
    """
    taus = np.array([spectral_point(t) for t in np.atleast_1d(taus)], dtype=complex)
    if np.any(taus == 0):
        raise ValueError("tau = 0 needs the zero-frequency solver")
    x_eval = np.asarray(x_eval, dtype=float)
    S, nt, nx = len(sources), len(taus), len(x_eval)
    out = BatchSolution(
        taus=taus, x=x_eval,
        v=np.zeros((S, nt, nx), complex), dv=np.zeros((S, nt, nx), complex),
        dv_plus=np.zeros((S, nt, nx), complex), wronskian=np.zeros(nt, complex),
        drift=np.zeros(nt), match_radius=0.0, seed_error=np.zeros(nt),
        psi_out=np.zeros((nt, nx), complex), psi_in=np.full((nt, nx), np.nan + 0j))
    for idx in _group(taus, batch):
        _solve_group(pot, taus[idx], sources, supports, x_eval, tol, R_min, full_in,
                     check_resonance, out, idx)
    return out


def _solve_group(pot, taus, sources, supports, x_eval, tol, R_min, full_in,
                 check_resonance, out, idx):
    n, S = len(taus), len(sources)
    regular = pot.left == "regular"
    x_lo = float(x_eval[0])
    sup_lo = min(s[0] for s in supports) if S else x_lo
    sup_hi = max(s[1] for s in supports) if S else x_lo
    x_hi = float(x_eval[-1])
    x_stop = x_hi if (full_in or S == 0) else min(max(sup_hi, x_lo), x_hi)
    if regular:
        x_start = min(x_lo, 1e-3, 1e-2 / max(1.0, float(np.max(np.abs(taus)))))
    else:
        x_start = min(x_lo, pot.x_min)
    # Wronskian check points inside the overlap of both sweeps
    x_chk = np.linspace(max(x_lo, x_start), x_stop, 9) if x_stop > x_lo else np.array([x_lo])

    gscale = np.array([_source_scale(g, sp) for g, sp in zip(sources, supports)])
    R0 = max(sup_hi, x_stop, R_min or 0.0, 4.0 * abs(pot.x_min) if not regular else 1.0, 10.0)
    seeds = [outgoing_seed(pot, t, R0, tol) for t in taus]
    R = max(s.R for s in seeds)
    out.match_radius = max(out.match_radius, R)
    y0 = np.zeros((2 + S) * n, complex)
    for i, t in enumerate(taus):
        f_, fp_, err_ = asymptotic_outgoing(pot, t, R)
        y0[i], y0[n + i] = f_[0], fp_[0]
        out.seed_error[idx[i]] = err_[0]
    atol = np.concatenate([np.full(2 * n, 1e-16)] + [np.full(n, 1e-16 * gs_) for gs_ in gscale])
    two_i_tau = 2j * taus
    gs = sources

    def rhs_out(x, y):
        f, fp = y[:n], y[n:2 * n]
        dy = np.empty_like(y)
        dy[:n] = fp
        dy[n:2 * n] = two_i_tau * fp + pot(x) * f
        if S:
            e = np.exp(-1j * taus * x) * f
            for k in range(S):
                gk = gs[k](x)
                dy[(2 + k) * n:(3 + k) * n] = -e * gk if gk != 0 else 0.0
        return dy

    pts_all = np.unique(np.concatenate([x_eval, x_chk]))
    near = pts_all[pts_all <= R][::-1]
    far = pts_all[pts_all > R]
    Y_near = np.zeros((len(y0), 0), complex)
    if len(near) and near[-1] >= R:
        Y_near = np.repeat(y0[:, None], len(near), axis=1)
    elif len(near):
        sol = solve_ivp(rhs_out, (R, near[-1]), y0, method="DOP853", t_eval=near,
                        rtol=RTOL, atol=atol)
        if not sol.success:
            raise RuntimeError(f"outgoing sweep failed: {sol.message}")
        Y_near = sol.y[:, ::-1]
    Y_far = np.zeros((len(y0), len(far)), complex)
    for i, t in enumerate(taus):
        if len(far):
            Y_far[i], Y_far[n + i], _ = asymptotic_outgoing(pot, t, far)
    xo = pts_all
    Yo = np.concatenate([Y_near, Y_far], axis=1)
    f, fp = Yo[:n], Yo[n:2 * n]
    J = Yo[2 * n:].reshape(S, n, Yo.shape[1])
    ph_out = np.exp(-1j * np.outer(taus, xo))
    psi_out, dpsi_out, out_plus = ph_out * f, ph_out * (fp - 1j * taus[:, None] * f), ph_out * fp

    # incoming sweep
    if regular:
        V0 = regular_offset(pot, x_start)
        y0 = np.zeros((2 + S) * n, complex)
        for i, t in enumerate(taus):
            y0[i], y0[n + i] = regular_seed(pot.ell, V0, t, x_start)
        tau2 = taus * taus

        def rhs_in(x, y):
            p, pp = y[:n], y[n:2 * n]
            dy = np.empty_like(y)
            dy[:n] = pp
            dy[n:2 * n] = (pot(x) - tau2) * p
            for k in range(S):
                gk = gs[k](x)
                dy[(2 + k) * n:(3 + k) * n] = p * gk if gk != 0 else 0.0
            return dy
    else:
        y0 = np.zeros((2 + S) * n, complex)
        y0[:n] = 1.0

        def rhs_in(x, y):
            hh, hp = y[:n], y[n:2 * n]
            dy = np.empty_like(y)
            dy[:n] = hp
            dy[n:2 * n] = -two_i_tau * hp + pot(x) * hh
            if S:
                e = np.exp(1j * taus * x) * hh
                for k in range(S):
                    gk = gs[k](x)
                    dy[(2 + k) * n:(3 + k) * n] = e * gk if gk != 0 else 0.0
            return dy

    amp = x_start ** (pot.ell + 1) if regular else 1.0
    atol_in = np.concatenate([np.full(2 * n, 1e-16 * amp)]
                             + [np.full(n, 1e-16 * amp * gs_) for gs_ in gscale])
    pts_in = np.unique(np.concatenate([x_eval[x_eval <= x_stop], x_chk]))
    if pts_in[0] > x_start:
        sol_in = solve_ivp(rhs_in, (x_start, pts_in[-1]), y0, method="DOP853", t_eval=pts_in,
                           rtol=RTOL, atol=atol_in)
        if not sol_in.success:
            raise RuntimeError(f"incoming sweep failed: {sol_in.message}")
        xi, Yi = sol_in.t, sol_in.y
    else:
        # first evaluation point coincides with the seed point
        rest = pts_in[1:]
        xi, Yi = np.array([x_start]), y0[:, None]
        if len(rest):
            sol_in = solve_ivp(rhs_in, (x_start, rest[-1]), y0, method="DOP853", t_eval=rest,
                               rtol=RTOL, atol=atol_in)
            xi = np.concatenate([xi, sol_in.t])
            Yi = np.concatenate([Yi, sol_in.y], axis=1)
    a, ap = Yi[:n], Yi[n:2 * n]
    K = Yi[2 * n:].reshape(S, n, Yi.shape[1])
    if regular:
        psi_in, dpsi_in = a, ap
        in_plus = ap + 1j * taus[:, None] * a
    else:
        ph_in = np.exp(1j * np.outer(taus, xi))
        psi_in = ph_in * a
        dpsi_in = ph_in * (ap + 1j * taus[:, None] * a)
        in_plus = ph_in * (ap + 2j * taus[:, None] * a)

    # Wronskian on the check points
    io = np.searchsorted(xo, x_chk)
    ii = np.searchsorted(xi, x_chk)
    Wc = psi_in[:, ii] * dpsi_out[:, io] - psi_out[:, io] * dpsi_in[:, ii]
    scale = np.abs(psi_in[:, ii] * dpsi_out[:, io]) + np.abs(psi_out[:, io] * dpsi_in[:, ii])
    W = Wc[:, -1]
    drift = np.max(np.abs(Wc - W[:, None]), axis=1) / np.abs(W)
    for i in range(n):
        if check_resonance and abs(W[i]) < RESONANCE_TOL * scale[i, -1]:
            raise ResonanceSuspected(f"|W| = {abs(W[i]):.3e} at tau = {taus[i]}")
    out.wronskian[idx] = W
    out.drift[idx] = drift

    # assemble on x_eval
    je = np.searchsorted(xo, x_eval)
    inside = x_eval <= x_stop
    ke = np.searchsorted(xi, x_eval[inside])
    Kfull = np.empty((S, n, len(x_eval)), complex)
    if S:
        Kfull[:, :, inside] = K[:, :, ke]
        Kfull[:, :, ~inside] = K[:, :, -1:]
    pin = np.zeros((n, len(x_eval)), complex)
    dpin = np.zeros_like(pin)
    pin_plus = np.zeros_like(pin)
    pin[:, inside], dpin[:, inside], pin_plus[:, inside] = (
        psi_in[:, ke], dpsi_in[:, ke], in_plus[:, ke])
    po, dpo, pop = psi_out[:, je], dpsi_out[:, je], out_plus[:, je]
    Je = J[:, :, je]
    Winv = (1.0 / W)[None, :, None]
    out.v[:, idx] = (po[None] * Kfull + pin[None] * Je) * Winv
    out.dv[:, idx] = (dpo[None] * Kfull + dpin[None] * Je) * Winv
    out.dv_plus[:, idx] = (pop[None] * Kfull + pin_plus[None] * Je) * Winv
    out.psi_out[idx] = po
    pin_nan = pin.copy()
    pin_nan[:, ~inside] = np.nan
    out.psi_in[idx] = pin_nan


@dataclass(frozen=True)
class JostData:
    """Both Jost functions and their Wronskian on a set of points."""

    tau: complex
    x: np.ndarray
    psi_out: np.ndarray
    psi_in: np.ndarray
    wronskian: complex
    drift: float
    match_radius: float
    seed_error: float


def jost_solutions(pot: ModePotential, tau, x) -> JostData:
    """Outgoing and left-end Jost solutions of psi'' + (tau^2 - V) psi = 0.

    The Wronskian psi_in psi_out' - psi_out psi_in' is evaluated on nine
    points spread over ``x``; ``drift`` is its largest relative deviation.
    """
    tau = spectral_point(tau)
    b = solve_batch(pot, [tau], [], [], x, full_in=True)
    return JostData(tau=tau, x=np.asarray(x, float), psi_out=b.psi_out[0], psi_in=b.psi_in[0],
                    wronskian=complex(b.wronskian[0]), drift=float(b.drift[0]),
                    match_radius=b.match_radius, seed_error=float(b.seed_error[0]))


def wronskian_on_axis(pot: ModePotential, s: float, x_ref: float | None = None) -> float:
    """Real Wronskian at tau = -i s (s > 0), normalized by its magnitude scale.

    On the negative imaginary axis both Jost solutions are real up to a
    constant phase, so sign changes in s locate eigenvalues -s^2 of
    -d_x^2 + V.
    """
    tau = -1j * s
    xr = x_ref if x_ref is not None else (1.0 if pot.left == "regular" else 0.0)
    b = solve_batch(pot, [tau], [], [], np.array([xr, xr + 1.0]), full_in=True,
                    check_resonance=False)
    W = complex(b.wronskian[0])
    po, pi_ = b.psi_out[0, 0], b.psi_in[0, 0]
    val = W / (abs(po) * abs(pi_) * max(s, 1e-300))
    return float(val.real)

