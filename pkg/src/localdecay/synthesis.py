"""Time-domain reconstruction from the outgoing resolvent.

With u_hat(tau) = int_0^inf exp(-i tau t) u dt the mode equation
phi_tt - phi_xx + V phi = 0 becomes

    (d_x^2 - V + tau^2) u_hat = -(i tau phi_0 + phi_1),

valid for Im tau < 0 and, by limiting absorption, on the real axis. For real
data u_hat(-tau) = conj(u_hat(tau)), so

    phi(t, x) = (1 / pi) Re int_0^inf exp(i tau t) u_hat(tau, x) d tau.

The tau integral is split into dyadic panels [2^-k, 2^-k+1] near zero
(where u_hat carries tau^n log tau terms that produce the late-time tail),
uniform panels up to tau_max, and a first panel [0, 2^-k_min] whose left
node uses the static solve. On each panel u_hat is replaced by its
interpolant on Clenshaw-Curtis points and the product with exp(i tau t) is
integrated exactly (Filon-type), by a Gauss-Legendre rule fine enough for
the largest requested t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AliasError, LocalDecayError, NodeFailure
from .evolve.core import WaveState
from .geometry import ModePotential
from .resolvent.jost import solve_batch, source_function
from .resolvent.lowfreq import LowFreqExpansion, zero_solve


def cc_points(a: float, b: float, n: int) -> np.ndarray:
    """n + 1 Chebyshev extreme points on [a, b], ascending."""
    k = np.arange(n + 1)
    return a + 0.5 * (b - a) * (1.0 - np.cos(np.pi * k / n))


def barycentric_matrix(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """B with B @ f(nodes) = interpolant at x (Chebyshev extreme points)."""
    n = len(nodes) - 1
    w = (-1.0) ** np.arange(n + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    d = x[:, None] - nodes[None, :]
    exact = d == 0
    d[exact] = 1.0
    c = w[None, :] / d
    B = c / c.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    B[rows] = exact[rows].astype(float)
    return B


@dataclass(frozen=True)
class SynthesisPlan:
    """Frequency panels, quadrature order and the target time window.

    ``cutoff_scale`` separates the dyadic low-frequency panels from the
    uniform high-frequency ones; ``panel_width`` is the width of the
    latter. The node set is symmetric under tau -> -tau; only tau >= 0 is
    solved, the negative half follows by conjugation.
    """

    tau_max: float = 6.0
    k_min: int = 14
    degree: int = 16
    panel_width: float = 0.5
    cutoff_scale: float = 1.0
    times: tuple = (0.0, 100.0, 1001)
    p1_vanishes: bool = True

    def __post_init__(self):
        if self.tau_max <= self.cutoff_scale:
            raise ValueError("tau_max must exceed cutoff_scale")
        t = self.time_grid()
        if t[-1] * 2.0 ** -self.k_min > 0.125:
            raise AliasError(
                f"t = {t[-1]:g} is beyond the resolution of the lowest panel 2^-{self.k_min}; "
                f"increase k_min to at least {math.ceil(math.log2(8 * t[-1]))}")

    def time_grid(self) -> np.ndarray:
        t0, t1, n = self.times
        return np.linspace(float(t0), float(t1), int(n))

    def panels(self) -> list[tuple[float, float]]:
        c = self.cutoff_scale
        out = [(0.0, c * 2.0 ** -self.k_min)]
        out += [(c * 2.0 ** -k, c * 2.0 ** (-k + 1)) for k in range(self.k_min, 0, -1)]
        m = max(1, int(math.ceil((self.tau_max - c) / self.panel_width)))
        edges = np.linspace(c, self.tau_max, m + 1)
        out += list(zip(edges[:-1], edges[1:]))
        return out

    def panel_degree(self, i: int) -> int:
        # the first panel is tiny and smooth on the scale 1/t; a low degree keeps
        # its smallest node away from tau = 0, where the outgoing seed radius
        # grows like 1/tau
        return min(self.degree, 4) if i == 0 else self.degree

    def positive_nodes(self) -> np.ndarray:
        pts = np.concatenate([cc_points(a, b, self.panel_degree(i))
                              for i, (a, b) in enumerate(self.panels())])
        return np.unique(pts)

    @property
    def tau_nodes(self) -> np.ndarray:
        p = self.positive_nodes()
        return np.concatenate([-p[:0:-1], p]) if p[0] == 0 else np.concatenate([-p[::-1], p])

    def weights(self, t: np.ndarray) -> np.ndarray:
        """Matrix Q with int_0^tau_max exp(i tau t) f(tau) d tau = Q @ f(nodes)."""
        nodes = self.positive_nodes()
        t = np.asarray(t, dtype=float)
        Q = np.zeros((len(t), len(nodes)), complex)
        tmax = float(np.max(np.abs(t))) if len(t) else 0.0
        for i, (a, b) in enumerate(self.panels()):
            deg = self.panel_degree(i)
            pn = cc_points(a, b, deg)
            idx = np.searchsorted(nodes, pn)
            half = 0.5 * (b - a)
            m = deg + int(math.ceil(1.5 * half * tmax)) + 16
            s, w = np.polynomial.legendre.leggauss(m)
            tg = a + half * (s + 1.0)
            B = barycentric_matrix(pn, tg) * (half * w)[:, None]
            for i0 in range(0, len(t), 256):
                tt = t[i0:i0 + 256]
                Q[i0:i0 + 256, idx] += np.exp(1j * np.outer(tt, tg)) @ B
        return Q


def spectral_cutoff(values, h: float, rel: float = 1e-6) -> float:
    """Smallest tau beyond which the spatial spectrum of ``values`` stays below rel x peak."""
    v = np.asarray(values, dtype=float)
    if not np.any(v):
        return 0.0
    n = 1 << int(math.ceil(math.log2(8 * len(v))))
    power = np.abs(np.fft.rfft(v, n))
    k = 2 * np.pi * np.fft.rfftfreq(n, h)
    above = np.flatnonzero(power > rel * power.max())
    return float(k[above[-1]]) if len(above) else 0.0


def plan_for(data: WaveState, t_max: float, nt: int | None = None, rel: float = 1e-6,
             **kw) -> SynthesisPlan:
    """Plan whose tau_max covers the data spectrum down to ``rel`` of its peak."""
    h = data.grid.h
    tm = max(spectral_cutoff(data.phi, h, rel), spectral_cutoff(data.pi, h, rel), 2.0)
    k_min = max(14, int(math.ceil(math.log2(8 * max(t_max, 1.0)))))
    nt = nt or int(round(t_max / 0.1)) + 1
    return SynthesisPlan(tau_max=float(tm), k_min=k_min, times=(0.0, float(t_max), nt), **kw)


@dataclass
class SynthesisResult:
    times: np.ndarray
    observers: np.ndarray
    phi: np.ndarray          # (nt, nobs), real part
    imag: np.ndarray         # imaginary part of the symmetric assembly
    taus: np.ndarray
    u_hat: np.ndarray        # (ntau, nobs)
    plan: SynthesisPlan
    wall_time: float = 0.0
    label: str = ""
    info: dict = field(default_factory=dict)

    def series(self, i: int = 0) -> tuple[np.ndarray, np.ndarray]:
        return self.times, self.phi[:, i]

    @property
    def imag_ratio(self) -> float:
        amp = float(np.max(np.abs(self.phi)))
        return float(np.max(np.abs(self.imag))) / amp if amp > 0 else 0.0


def transform_at_nodes(pot: ModePotential, data: WaveState, taus, observers,
                       batch: int = 12) -> np.ndarray:
    """u_hat(tau, x_obs) = -R_tau(i tau phi_0 + phi_1) at every node (tau = 0 allowed)."""
    x = data.grid.x
    obs = np.sort(np.asarray(observers, dtype=float))
    srcs, sups, kinds = [], [], []
    for name, vals in (("phi0", data.phi), ("phi1", data.pi)):
        g, sup = source_function(np.asarray(vals, dtype=float), x)
        if sup[1] > sup[0]:
            srcs.append(g)
            sups.append(sup)
            kinds.append(name)
    taus = np.asarray(taus, dtype=float)
    out = np.zeros((len(taus), len(obs)), complex)
    if not srcs:
        return out
    zero = taus == 0
    pos = ~zero
    if np.any(pos):
        try:
            b = solve_batch(pot, taus[pos], srcs, sups, obs, batch=batch)
        except LocalDecayError as exc:
            raise NodeFailure(complex(taus[pos][0]), exc) from exc
        acc = np.zeros((int(pos.sum()), len(obs)), complex)
        for s, kind in enumerate(kinds):
            if kind == "phi0":
                acc += 1j * taus[pos][:, None] * b.v[s]
            else:
                acc += b.v[s]
        out[pos] = -acc
    if np.any(zero):
        try:
            z = zero_solve(pot, srcs, sups, obs)
        except LocalDecayError as exc:
            raise NodeFailure(0j, exc) from exc
        if "phi1" in kinds:
            out[zero] = -z.v[kinds.index("phi1")][None]
    return out


def synthesize(pot: ModePotential, data: WaveState, plan: SynthesisPlan, observers,
               explicit_negative: bool = False) -> SynthesisResult:
    """phi(t, x_obs) by Fourier inversion of u_hat over the plan's nodes.

    With ``explicit_negative`` the negative half-line is solved as well
    instead of being obtained by conjugation, and the imaginary part of the
    assembled signal measures how well the two halves agree.
    """
    import time as _time
    t0 = _time.perf_counter()
    obs = np.sort(np.asarray(observers, dtype=float))
    nodes = plan.positive_nodes()
    t = plan.time_grid()
    Q = plan.weights(t)
    uh = transform_at_nodes(pot, data, nodes, obs)
    pos = Q @ uh
    if explicit_negative:
        neg_nodes = -nodes
        uh_neg = np.zeros_like(uh)
        nz = nodes > 0
        uh_neg[nz] = transform_at_nodes(pot, data, neg_nodes[nz], obs)
        uh_neg[~nz] = uh[~nz]
        # int_{-tau_max}^0 exp(i tau t) f(tau) d tau = conj-free mirror of the positive rule
        neg = np.conj(Q) @ uh_neg
        full = (pos + neg) / (2 * np.pi)
    else:
        full = (pos + np.conj(pos)) / (2 * np.pi)
    return SynthesisResult(times=t, observers=obs, phi=full.real, imag=full.imag,
                           taus=nodes, u_hat=uh, plan=plan,
                           wall_time=_time.perf_counter() - t0, label=pot.label)


@dataclass(frozen=True)
class TailPrediction:
    """Tail implied by the s^k log s terms of the small-tau transform (s = i tau)."""

    exponent: float
    amplitude: float
    order: int
    log_coefficients: np.ndarray
    analytic_coefficients: np.ndarray
    t: np.ndarray
    predicted: np.ndarray
    fitted_exponent: float | None = None
    difference: float | None = None
    present: bool = True
    significance: np.ndarray | None = None     # |b_k| / standard error


def fit_log_terms(taus, values, K: int = 4):
    """Least squares for sum_k a_k s^k + sum_{k>=1} b_k s^k log s, s = i tau.

    For real sources the transform satisfies u_hat(-tau) = conj(u_hat(tau)),
    which forces every a_k and b_k to be real; the fit imposes that, so the
    i pi / 2 carried by log s separates the log terms from the analytic ones.
    Returns (a, b, z) with z[k] = |b_k| over its standard error (z[0] = 0).
    """
    taus = np.asarray(taus, dtype=float)
    s = 1j * taus
    ls = np.log(taus) + 0.5j * np.pi
    cols = [s ** k for k in range(K + 1)] + [s ** k * ls for k in range(1, K + 1)]
    A = np.column_stack(cols)
    Ar = np.vstack([A.real, A.imag])
    y = np.asarray(values, dtype=complex)
    yr = np.concatenate([y.real, y.imag])
    scale = np.abs(Ar).max(axis=0)
    B = Ar / scale
    coef, *_ = np.linalg.lstsq(B, yr, rcond=None)
    n, p = B.shape
    if n <= p:
        raise ValueError(f"need more than {p // 2} frequencies for K = {K}")
    s2 = float(np.sum((B @ coef - yr) ** 2)) / (n - p)
    se = np.sqrt(np.maximum(s2 * np.diag(np.linalg.pinv(B.T @ B)), 1e-300))
    z = np.abs(coef) / se
    coef = coef / scale
    a = coef[:K + 1]
    b = np.concatenate([[0.0], coef[K + 1:]])
    return a, b, np.concatenate([[0.0], z[K + 1:]])


def tail_from_low_freq(expansion: LowFreqExpansion, t_range, x_obs: float | None = None,
                       K: int = 4, z_min: float = 100.0,
                       fitted_exponent: float | None = None) -> TailPrediction:
    """Predicted late-time tail at ``x_obs`` from the small-tau samples.

    A term b_k s^k log s of the transform corresponds to
    -b_k (-1)^k k! t^-(k+1) in time. Terms whose coefficient is below
    ``z_min`` standard errors are dropped; the sample errors are smooth in
    tau rather than independent, so the bar sits far above the usual 2-3.
    The exponent is the log-log slope over ``t_range`` of the remaining sum.
    With no term left ``present`` is False: the samples show no tail at
    orders up to K (or none they can resolve; an s^4 log s term, as for
    l = 1 on Schwarzschild, usually needs a wider sweep).
    """
    x = expansion.x
    i = int(np.argmin(np.abs(x - (x_obs if x_obs is not None else x[len(x) // 2]))))
    vals = expansion.samples[:, i]
    a, b, z = fit_log_terms(expansion.taus, vals, K)
    t = np.geomspace(float(t_range[0]), float(t_range[1]), 64)
    pred = np.zeros_like(t)
    order = 0
    for k in range(1, K + 1):
        if z[k] > z_min:
            order = order or k
            pred = pred - b[k] * (-1) ** k * math.factorial(k) * t ** -(k + 1.0)
    if not order:
        return TailPrediction(exponent=math.nan, amplitude=0.0, order=0, log_coefficients=b,
                              analytic_coefficients=a, t=t, predicted=pred,
                              fitted_exponent=fitted_exponent, present=False,
                              significance=z)
    lt, ly = np.log(t), np.log(np.abs(pred) + 1e-300)
    p = -float(np.polyfit(lt, ly, 1)[0])
    amp = float(-b[order] * (-1) ** order * math.factorial(order))
    diff = None if fitted_exponent is None else fitted_exponent - p
    return TailPrediction(exponent=p, amplitude=amp, order=order, log_coefficients=b,
                          analytic_coefficients=a, t=t, predicted=pred,
                          fitted_exponent=fitted_exponent, difference=diff, significance=z)
