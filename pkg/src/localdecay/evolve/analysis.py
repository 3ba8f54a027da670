"""Decay-rate extraction and light-cone profiles from evolution output."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientDecade, RayOutsideGrid, SignChange
from ..geometry import bracket


def local_log_derivative(t, y, smooth: int = 1):
    """d ln|y| / d ln t by centred differences on the given samples."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    lt, ly = np.log(t), np.log(np.abs(y))
    lld = np.gradient(ly, lt)
    if smooth > 1:
        k = np.ones(smooth) / smooth
        lld = np.convolve(lld, k, mode="same")
    return lld


@dataclass(frozen=True)
class DecayFit:
    """Power-law fit |y| ~ A t^(-p) on a window.

    ``drift`` is the spread (max - min) of the local logarithmic derivative
    over the final half-decade of the window.
    """

    p: float
    A: float
    r2: float
    drift: float
    window: tuple
    lld_t: np.ndarray
    lld: np.ndarray
    sign: float

    def summary(self) -> str:
        return (f"p = {self.p:.4f}  A = {self.A:.6g}  R^2 = {self.r2:.6f}  "
                f"drift = {self.drift:.4f}  window = [{self.window[0]:g}, {self.window[1]:g}]")


def fit_decay(t, y, window, min_decades: float = 1.0, n_lld: int = 200) -> DecayFit:
    """Least-squares slope of ln|y| against ln t on ``window``.

    Raises SignChange if ``y`` changes sign (or vanishes) in the window and
    InsufficientDecade if the window spans less than ``min_decades``.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    t1, t2 = float(window[0]), float(window[1])
    if t1 <= 0 or np.log10(t2 / t1) < min_decades - 1e-12:
        raise InsufficientDecade(f"window [{t1:g}, {t2:g}] spans less than "
                                 f"{min_decades:g} decade(s)")
    m = (t >= t1) & (t <= t2)
    if m.sum() < 8:
        raise InsufficientDecade("too few samples in the window")
    tw, yw = t[m], y[m]
    s = np.sign(yw)
    if np.any(s == 0) or np.any(s != s[0]):
        k = int(np.argmax(s != s[0])) if np.any(s != s[0]) else int(np.argmax(s == 0))
        raise SignChange(f"series changes sign near t = {tw[k]:g}; move the window later")
    X, Y = np.log(tw), np.log(np.abs(yw))
    slope, icpt = np.polyfit(X, Y, 1)
    resid = Y - (slope * X + icpt)
    ss_tot = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0

    # LLD on a log-uniform resampling keeps the estimate independent of dt;
    # resample only the sampled span so np.interp never clamps at the ends
    tl = np.geomspace(tw[0], tw[-1], n_lld)
    yl = np.exp(np.interp(np.log(tl), X, Y))
    lld = local_log_derivative(tl, yl)
    tail = tl >= tw[-1] / np.sqrt(10.0)
    drift = float(lld[tail].max() - lld[tail].min())
    return DecayFit(p=-float(slope), A=float(np.exp(icpt)), r2=r2, drift=drift,
                    window=(t1, t2), lld_t=tl, lld=lld, sign=float(s[0]))


def detect_tail_window(t, y, tol: float = 0.25, n: int = 400) -> tuple[float, float]:
    """Start of the power-law regime, from stabilization of the LLD.

    Returns ``(t_start, t_end)`` where ``t_start`` follows the last sign
    change and every later LLD sample s satisfies |LLD(s) - LLD(2 s)| < tol.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    pos = t > 0
    t, y = t[pos], y[pos]
    s = np.sign(y)
    flips = np.nonzero(s[1:] != s[:-1])[0]
    t_first = t[flips[-1] + 1] if len(flips) else t[0]
    t_end = t[-1]
    if t_end <= 2.0 * t_first:
        return float(t_first), float(t_end)
    tl = np.geomspace(t_first, t_end, n)
    ly = np.interp(np.log(tl), np.log(t), np.log(np.abs(y) + 1e-300))
    lld = np.gradient(ly, np.log(tl))
    half = np.searchsorted(tl, t_end / 2.0)
    ok = np.ones(half, dtype=bool)
    for i in range(half):
        j = np.searchsorted(tl, 2.0 * tl[i])
        ok[i] = abs(lld[i] - lld[min(j, n - 1)]) < tol
    bad = np.nonzero(~ok)[0]
    start = tl[bad[-1] + 1] if len(bad) else tl[0]
    return float(start), float(t_end)


@dataclass(frozen=True)
class ConeProfile:
    """|u| <t + x><t - x>^2 sampled along the ray x = speed t - c."""

    c: float
    speed: float
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    weighted: np.ndarray

    @property
    def sup(self) -> float:
        return float(np.max(self.weighted))

    def dyadic_sups(self) -> list[tuple[float, float]]:
        """(2^k, sup over t in [2^k, 2^(k+1))) for every populated dyad."""
        out = []
        k0 = int(np.floor(np.log2(self.t[0])))
        k1 = int(np.floor(np.log2(self.t[-1])))
        for k in range(k0, k1 + 1):
            m = (self.t >= 2.0 ** k) & (self.t < 2.0 ** (k + 1))
            if m.any():
                out.append((2.0 ** k, float(self.weighted[m].max())))
        return out

    def growth_ratio(self) -> float:
        """Sup over the last full dyad divided by the sup over the first."""
        d = self.dyadic_sups()
        full = [v for (a, v) in d if 2 * a <= self.t[-1] and a >= self.t[0]]
        if len(full) < 2:
            full = [v for (_, v) in d]
        return full[-1] / full[0]


def cone_profile(times, x, snapshots, rho_of_x, c: float, speed: float = 1.0,
                 t_min: float | None = None) -> ConeProfile:
    """Weighted amplitude along x = speed t - c from full-grid snapshots.

    The mode field is converted to u = phi / rho before weighting; the
    tortoise coordinate plays the role of the radius in the weights, which
    is the normalized radial variable of the reduced problem.
    """
    times = np.asarray(times, dtype=float)
    x = np.asarray(x, dtype=float)
    xr = speed * times - c
    ok = (xr >= max(x[0], 1e-12)) & (xr <= x[-1])
    if t_min is not None:
        ok &= times >= t_min
    if not ok.any():
        raise RayOutsideGrid(f"ray x = {speed:g} t - {c:g} misses the snapshot grid")
    ts, xs = times[ok], xr[ok]
    rows = np.nonzero(ok)[0]
    phi = np.array([_interp4(x, snapshots[k], xv) for k, xv in zip(rows, xs)])
    u = phi / np.asarray(rho_of_x(xs), dtype=float)
    w = np.abs(u) * bracket(ts + xs) * bracket(ts - xs) ** 2
    return ConeProfile(c=c, speed=speed, t=ts, x=xs, u=u, weighted=w)


def _interp4(x, f, x0):
    h = x[1] - x[0]
    s = (x0 - x[0]) / h
    i = min(max(int(np.floor(s)) - 1, 0), len(x) - 4)
    nodes = np.arange(i, i + 4)
    val = 0.0
    for a in range(4):
        others = np.delete(nodes, a)
        val += f[nodes[a]] * np.prod((s - others) / (nodes[a] - others))
    return val


@dataclass(frozen=True)
class ConvergenceStudy:
    """Self-convergence of observer series under grid halving.

    ``differences[i]`` is the L2 norm (in t) of the series at h_i minus the
    series at h_{i+1}, on the time samples the coarsest run shares with all
    others; ``orders[i] = log2(differences[i] / differences[i + 1])``.
    """

    hs: tuple
    differences: np.ndarray
    orders: np.ndarray

    @property
    def order(self) -> float:
        return float(self.orders[-1])

    def table(self) -> str:
        rows = ["# h  diff_to_next  order"]
        for i, h in enumerate(self.hs[:-1]):
            o = f"{self.orders[i]:.4f}" if i < len(self.orders) else ""
            rows.append(f"{h:.6g} {self.differences[i]:.6e} {o}")
        return "\n".join(rows) + "\n"


def convergence_study(run, hs) -> ConvergenceStudy:
    """Order of accuracy from runs at successively halved spacings.

    ``run(h)`` must return (t, y) with time step proportional to h; every
    spacing must be half the previous one.
    """
    hs = tuple(float(h) for h in hs)
    if len(hs) < 3 or any(abs(b - a / 2) > 1e-12 * a for a, b in zip(hs, hs[1:])):
        raise ValueError("need at least three spacings, each half the previous")
    series = [run(h) for h in hs]
    t0 = series[0][0]
    common = []
    for k, (t, y) in enumerate(series):
        step = 2 ** k
        if len(t) < (len(t0) - 1) * step + 1 or not np.allclose(t[::step][:len(t0)], t0):
            raise ValueError("time samples do not nest under halving")
        common.append(np.asarray(y)[::step][:len(t0)])
    dt = t0[1] - t0[0]
    diffs = np.array([np.sqrt(dt * np.sum((a - b) ** 2)) for a, b in zip(common, common[1:])])
    orders = np.log2(diffs[:-1] / diffs[1:])
    return ConvergenceStudy(hs=hs, differences=diffs, orders=orders)
