"""Stationary spherically symmetric backgrounds and their mode reduction.

A background is stored through the long-range perturbation of its lower
metric components in (t, r) coordinates,

    g = -(1 - g_tt) dt^2 + g_tr dt dr + (1 + g_rr) dr^2 + r^2 (1 + g_ww) dw^2,

together with a scalar potential entering as ``box_g u = V u``. A positive
potential is therefore repulsive.

:func:`normalize_coordinates` removes the dt dr cross term by a time shift
``t -> t + a(r)`` and passes to the tortoise variable ``x = r*`` in which the
inverse metric satisfies ``g^{tt} = -g^{xx}``. :func:`mode_potential` then
separates variables: the field ``phi = rho * u_l`` with areal radius ``rho``
obeys

    phi_tt - phi_xx + V_l(x) phi = 0,
    V_l = rho_xx / rho + F (l (l + 1) / rho^2 + V),

where ``F = -1 / g^{tt}`` in the shifted coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from ._fd import diff_callable
from .errors import DecayViolation, InvalidBackground, NonMonotoneTortoise

__all__ = [
    "bracket",
    "RadialFunction",
    "BackgroundMetric",
    "CanonicalOperator",
    "ModePotential",
    "RadialGrid",
    "normalize_coordinates",
    "mode_potential",
    "normalization_report",
    "schwarzschild_r_of_x",
]


def bracket(r):
    """Japanese bracket <r> = sqrt(r^2 + 4), bounded below by 2."""
    r = np.asarray(r, dtype=float)
    return np.sqrt(r * r + 4.0)


class RadialFunction:
    """Vectorized function of r with finite-difference derivatives.

    Parameters
    ----------
    fun : callable
        Maps an array of radii to values of the same shape.
    name : str
        Label used in error messages.
    is_zero : bool
        Marks the identically vanishing function so that checks can skip it.
    """

    def __init__(self, fun: Callable, name: str = "", is_zero: bool = False):
        self._fun = fun
        self.name = name
        self.is_zero = is_zero

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.is_zero:
            return np.zeros_like(r)
        return np.asarray(self._fun(r), dtype=float)

    def derivative(self, r, n: int = 1):
        if self.is_zero:
            return np.zeros_like(np.asarray(r, dtype=float))
        return diff_callable(self, r, n)

    @classmethod
    def zero(cls, name: str = "") -> "RadialFunction":
        return cls(lambda r: np.zeros_like(r), name=name, is_zero=True)

    @classmethod
    def from_table(cls, r, values, name: str = "") -> "RadialFunction":
        """Cubic spline through tabulated samples.

        Outside the table the function is continued by a power law fitted to
        the last two samples, which keeps symbol-class checks meaningful when
        the sample grid reaches past the table.
        """
        r = np.asarray(r, dtype=float)
        values = np.asarray(values, dtype=float)
        order = np.argsort(r)
        r, values = r[order], values[order]
        spline = CubicSpline(r, values, bc_type="not-a-knot")
        r_hi = r[-1]
        v1, v0 = values[-1], values[-2]
        if v1 != 0.0 and v0 != 0.0 and np.sign(v1) == np.sign(v0):
            p = math.log(abs(v1 / v0)) / math.log(r[-1] / r[-2])
        else:
            p = -1.0

        def fun(x):
            x = np.asarray(x, dtype=float)
            out = spline(np.clip(x, r[0], r_hi))
            far = x > r_hi
            if np.any(far):
                out = np.where(far, v1 * (np.maximum(x, r_hi) / r_hi) ** p, out)
            return out

        return cls(fun, name=name)

    @classmethod
    def from_file(cls, path, name: str = "") -> "RadialFunction":
        """Read a two-column text table ``r value``."""
        data = np.loadtxt(Path(path), ndmin=2)
        if data.shape[1] < 2:
            raise InvalidBackground(f"{path}: expected two columns (r, value)")
        return cls.from_table(data[:, 0], data[:, 1], name=name or Path(path).stem)


def _zero(name):
    return RadialFunction.zero(name)


def _check_decay(fn: RadialFunction, order: float, r_lo: float = 10.0,
                 r_hi: float = 1e4, jmax: int = 4, max_rate: float = 0.3) -> None:
    """Raise DecayViolation unless |d^j fn| <r>^(-order+j) stays bounded.

    On a finite sample boundedness is judged from the growth rate of the
    weighted sup between the last two decades: a rate above ``max_rate``
    (in powers of r) is a violation, logarithmic growth is tolerated since
    the tortoise variable introduces it.
    """
    if fn.is_zero:
        return
    r = np.geomspace(r_lo, r_hi, 401)
    mid = r_hi / 10.0
    for j in range(jmax + 1):
        vals = fn(r) if j == 0 else fn.derivative(r, j)
        if not np.all(np.isfinite(vals)):
            raise DecayViolation(f"{fn.name}: non-finite derivative of order {j}")
        weighted = np.abs(vals) * bracket(r) ** (-order + j)
        prev = weighted[(r >= mid / 10.0) & (r <= mid)].max()
        last = weighted[r >= mid].max()
        if last < 1e-14:
            continue
        rate = math.log10(last / max(prev, 1e-300))
        if rate > max_rate:
            raise DecayViolation(
                f"{fn.name}: derivative {j} decays slower than <r>^{order - j} "
                f"(weighted sup grows like r^{rate:.2f})"
            )


@dataclass(frozen=True)
class BackgroundMetric:
    """Stationary spherically symmetric background.

    ``kind`` is one of ``"minkowski"``, ``"schwarzschild"``, ``"custom"`` and
    ``domain_kind`` is ``"whole"`` (regular centre) or ``"exterior"``
    (black-hole exterior, inner boundary ``R0`` inside the horizon).
    """

    kind: str
    g_tt: RadialFunction
    g_tr: RadialFunction
    g_rr: RadialFunction
    g_ww: RadialFunction
    V_lr: RadialFunction
    V_sr: RadialFunction
    domain_kind: str = "whole"
    mass: float = 0.0
    R0: float | None = None
    r_inner: float = 0.0
    short_range: Mapping[str, RadialFunction] = field(default_factory=dict)
    normalized: bool = False

    def __post_init__(self):
        if self.kind not in ("minkowski", "schwarzschild", "custom"):
            raise InvalidBackground(f"unknown background kind {self.kind!r}")
        if self.domain_kind not in ("whole", "exterior"):
            raise InvalidBackground(f"unknown domain kind {self.domain_kind!r}")
        if self.kind == "schwarzschild":
            if not self.mass > 0:
                raise InvalidBackground("Schwarzschild mass must be positive")
            if self.R0 is not None and not (0.0 < self.R0 < 2.0 * self.mass):
                raise InvalidBackground("inner boundary must satisfy 0 < R0 < 2M")

    # constructors -------------------------------------------------------
    @classmethod
    def minkowski(cls, V_lr: RadialFunction | None = None) -> "BackgroundMetric":
        return cls(
            kind="minkowski" if V_lr is None else "custom",
            g_tt=_zero("g_tt"), g_tr=_zero("g_tr"), g_rr=_zero("g_rr"),
            g_ww=_zero("g_ww"), V_lr=V_lr or _zero("V_lr"), V_sr=_zero("V_sr"),
        )

    @classmethod
    def schwarzschild(cls, mass: float = 1.0, R0: float | None = None,
                      time_shift: Callable | None = None) -> "BackgroundMetric":
        """Schwarzschild exterior.

        ``time_shift`` is an optional derivative b'(r) of a coordinate change
        t -> t + b(r); it introduces a dt dr cross term that normalization
        must remove again.
        """
        M = float(mass)
        if R0 is None:
            R0 = M
        g_tt = RadialFunction(lambda r: 2.0 * M / r, "g_tt")
        if time_shift is None:
            g_tr = _zero("g_tr")
            g_rr = RadialFunction(lambda r: 2.0 * M / (r - 2.0 * M), "g_rr")
        else:
            def g_tr_f(r):
                return 2.0 * (1.0 - 2.0 * M / r) * time_shift(r)

            def g_rr_f(r):
                F = 1.0 - 2.0 * M / r
                return 1.0 / F - F * time_shift(r) ** 2 - 1.0

            g_tr = RadialFunction(g_tr_f, "g_tr")
            g_rr = RadialFunction(g_rr_f, "g_rr")
        return cls(
            kind="schwarzschild", g_tt=g_tt, g_tr=g_tr, g_rr=g_rr,
            g_ww=_zero("g_ww"), V_lr=_zero("V_lr"), V_sr=_zero("V_sr"),
            domain_kind="exterior", mass=M, R0=R0, r_inner=2.0 * M,
        )

    @classmethod
    def custom(cls, *, g_tt=None, g_tr=None, g_rr=None, g_ww=None, V_lr=None,
               V_sr=None, domain_kind: str = "whole", r_inner: float = 0.0,
               R0: float | None = None, mass: float = 0.0,
               short_range: Mapping[str, RadialFunction] | None = None,
               check: bool = True) -> "BackgroundMetric":
        """Background from radial coefficient functions (or tables)."""

        def wrap(f, name):
            if f is None:
                return _zero(name)
            if isinstance(f, RadialFunction):
                return f
            return RadialFunction(f, name)

        metric = cls(
            kind="custom", g_tt=wrap(g_tt, "g_tt"), g_tr=wrap(g_tr, "g_tr"),
            g_rr=wrap(g_rr, "g_rr"), g_ww=wrap(g_ww, "g_ww"),
            V_lr=wrap(V_lr, "V_lr"), V_sr=wrap(V_sr, "V_sr"),
            domain_kind=domain_kind, r_inner=float(r_inner), R0=R0, mass=mass,
            short_range=dict(short_range or {}),
        )
        if check:
            metric.check_decay()
        return metric

    @classmethod
    def from_files(cls, paths: Mapping[str, str], **kwargs) -> "BackgroundMetric":
        """Custom background from two-column coefficient files.

        ``paths`` maps coefficient names (``g_tt``, ``g_tr``, ``g_rr``,
        ``g_ww``, ``V_lr``, ``V_sr``) to file paths.
        """
        allowed = {"g_tt", "g_tr", "g_rr", "g_ww", "V_lr", "V_sr"}
        funcs = {}
        for key, path in paths.items():
            if key not in allowed:
                raise InvalidBackground(f"unknown coefficient {key!r}")
            funcs[key] = RadialFunction.from_file(path, name=key)
        return cls.custom(**funcs, **kwargs)

    # inverse metric -----------------------------------------------------
    def inverse(self, r):
        """Inverse (t, r) block ``(g^tt, g^tr, g^rr)``."""
        r = np.asarray(r, dtype=float)
        gtt = -1.0 + self.g_tt(r)
        gtr = 0.5 * self.g_tr(r)
        grr = 1.0 + self.g_rr(r)
        det = gtt * grr - gtr * gtr
        return grr / det, -gtr / det, gtt / det

    def long_range_inverse(self, r):
        """Long-range part of the inverse metric ``(g^tt + 1, g^tr, g^rr - 1)``."""
        itt, itr, irr = self.inverse(r)
        return itt + 1.0, itr, irr - 1.0

    def areal_radius(self, r):
        r = np.asarray(r, dtype=float)
        return r * np.sqrt(1.0 + self.g_ww(r))

    def scalar_potential(self, r):
        return self.V_lr(r) + self.V_sr(r)

    def check_decay(self) -> None:
        """Verify the declared symbol classes on r in [10, 1e4]."""
        for fn in (self.g_tt, self.g_tr, self.g_rr, self.g_ww):
            _check_decay(fn, -1.0)
        _check_decay(self.V_lr, -3.0)
        _check_decay(self.V_sr, -3.0)
        for name, fn in self.short_range.items():
            _check_decay(fn, -1.0)

    def check_spacelike(self) -> None:
        """t = const slices are space-like where g^tt < 0."""
        lo = 1.5 * self.r_inner if self.domain_kind == "exterior" else 1e-3
        r = np.geomspace(max(lo, 1e-3), 1e5, 600)
        itt, _, _ = self.inverse(r)
        if not np.all(itt < 0):
            bad = r[np.argmax(~(itt < 0))]
            raise InvalidBackground(f"t = const slice not space-like at r = {bad:.6g}")

    @property
    def flat_coordinates(self) -> bool:
        """True when all metric perturbations vanish (potential may not)."""
        return all(f.is_zero for f in (self.g_tt, self.g_tr, self.g_rr, self.g_ww))


def schwarzschild_r_of_x(x, M: float = 1.0):
    """Invert x = r + 2M ln(r/2M - 1).

    Writes r = 2M (1 + e^L) and solves e^L + L = x/2M - 1 by Newton; the
    function is convex and increasing so Newton converges from any start.
    """
    if np.ndim(x) == 0:
        y = float(x) / (2.0 * M) - 1.0
        L = y if y < 1.0 else math.log(y - math.log(y))
        for _ in range(60):
            eL = math.exp(L)
            step = (eL + L - y) / (eL + 1.0)
            L -= step
            if abs(step) < 1e-15 * max(1.0, abs(L)):
                break
        return 2.0 * M * (1.0 + math.exp(L))
    y = np.asarray(x, dtype=float) / (2.0 * M) - 1.0
    big = y >= 1.0
    L = np.where(big, np.log(np.where(big, y - np.log(np.where(big, y, 2.0)), 1.0)), y)
    for _ in range(60):
        eL = np.exp(L)
        step = (eL + L - y) / (eL + 1.0)
        L = L - step
        if np.all(np.abs(step) < 1e-15 * np.maximum(1.0, np.abs(L))):
            break
    return 2.0 * M * (1.0 + np.exp(L))


@dataclass(frozen=True)
class CanonicalOperator:
    """Background in normalized coordinates (t, x = r*).

    All callables take areal-coordinate radii r of the input metric unless
    their name says otherwise.
    """

    metric: BackgroundMetric
    r_match: float
    x_of_r: Callable
    r_of_x: Callable
    dxdr: Callable
    shift_derivative: Callable
    F: Callable
    rho: Callable
    rho_xx_over_rho: Callable
    sr_terms: Mapping[str, RadialFunction]

    @property
    def kind(self) -> str:
        return self.metric.kind

    @property
    def domain_kind(self) -> str:
        return self.metric.domain_kind

    @property
    def mass(self) -> float:
        return self.metric.mass

    def shift(self, r):
        """Time shift a(r), normalized by a(r_match) = 0."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty_like(r)
        for i, ri in enumerate(r):
            out[i] = quad(lambda s: float(self.shift_derivative(s)), self.r_match, ri,
                          epsabs=1e-14, epsrel=1e-12, limit=200)[0]
        return out

    def conjugation_weight(self, r):
        """g^{1/4} (-g^{tt})^{-1/2} in the normalized frame, equal to F rho / x."""
        r = np.asarray(r, dtype=float)
        return self.F(r) * self.rho(r) / self.x_of_r(r)

    def lr_angular(self, r):
        """Long-range angular coefficient F / rho^2 - 1 / x^2."""
        r = np.asarray(r, dtype=float)
        return self.F(r) / self.rho(r) ** 2 - 1.0 / self.x_of_r(r) ** 2

    def lr_scalar(self, r):
        """Mode-independent scalar term of the normalized operator."""
        r = np.asarray(r, dtype=float)
        return -(self.rho_xx_over_rho(r) + self.F(r) * self.metric.scalar_potential(r))

    def transformed_inverse(self, r):
        """Inverse metric ``(G^tt, G^tx, G^xx)`` after shift and tortoise map."""
        r = np.asarray(r, dtype=float)
        itt, itr, irr = self.metric.inverse(r)
        a = self.shift_derivative(r)
        k = self.dxdr(r)
        Gtt = itt + 2.0 * a * itr + a * a * irr
        Gtx = k * (itr + a * irr)
        Gxx = k * k * irr
        return Gtt, Gtx, Gxx

    def hrrtt_residuals(self, r):
        """``(|G_lr^tt + G_lr^xx|, |G_lr^tx|)`` of the normalized inverse metric."""
        Gtt, Gtx, Gxx = self.transformed_inverse(r)
        return np.abs((Gtt + 1.0) + (Gxx - 1.0)), np.abs(Gtx)

    def as_metric(self) -> BackgroundMetric:
        """The normalized background, with x as radial coordinate."""
        x_match = float(self.x_of_r(self.r_match))

        def r_of(x):
            return self.r_of_x(np.maximum(x, x_match))

        def g_tt(x):
            Gtt, _, _ = self.transformed_inverse(r_of(x))
            return 1.0 + 1.0 / Gtt

        def g_rr(x):
            _, _, Gxx = self.transformed_inverse(r_of(x))
            return 1.0 / Gxx - 1.0

        def g_ww(x):
            return (self.rho(r_of(x)) / x) ** 2 - 1.0

        def V_lr(x):
            return self.metric.scalar_potential(r_of(x))

        return BackgroundMetric(
            kind="custom",
            g_tt=RadialFunction(g_tt, "g_tt"), g_tr=_zero("g_tr"),
            g_rr=RadialFunction(g_rr, "g_rr"),
            g_ww=_zero("g_ww") if self.metric.kind == "minkowski" else RadialFunction(g_ww, "g_ww"),
            V_lr=RadialFunction(V_lr, "V_lr") if not self.metric.V_lr.is_zero else _zero("V_lr"),
            V_sr=_zero("V_sr"),
            domain_kind=self.metric.domain_kind, mass=self.metric.mass,
            r_inner=x_match if self.metric.domain_kind == "exterior" else 0.0,
            normalized=True,
        )


def _numeric_tortoise(dxdr: Callable, r_lo: float, r_ref: float, r_hi: float = 1e7,
                      r_edge: float = 0.0):
    """Tabulate x(r) with x(r_ref) = r_ref and return (x_of_r, r_of_x).

    Table nodes are geometric in r - r_edge so that a horizon at r_edge,
    where dx/dr blows up, is resolved.
    """
    rt = r_edge + np.geomspace(r_lo - r_edge, r_hi - r_edge, 4000)
    rt = np.unique(np.concatenate([rt, [r_ref]]))
    k = np.asarray(dxdr(rt), dtype=float)
    if not np.all(np.isfinite(k)) or np.any(k <= 0):
        bad = rt[np.argmax(~(np.isfinite(k) & (k > 0)))]
        raise NonMonotoneTortoise(f"dr*/dr <= 0 at r = {bad:.6g}")
    # 10-point Gauss-Legendre on each (short, geometric) interval
    gx, gw = np.polynomial.legendre.leggauss(10)
    a, b = rt[:-1, None], rt[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * gx[None, :]
    inc = 0.5 * (b - a)[:, 0] * (np.asarray(dxdr(nodes), dtype=float) @ gw)
    xt = np.concatenate([[0.0], np.cumsum(inc)])
    iref = int(np.searchsorted(rt, r_ref))
    xt += r_ref - xt[iref]
    spline = CubicHermiteSpline(rt, xt, k)

    def x_of_r(r):
        r = np.asarray(r, dtype=float)
        beyond = r > r_hi
        out = spline(np.clip(r, r_lo, r_hi))
        if np.any(beyond):
            out = np.where(beyond, xt[-1] + (r - r_hi) * k[-1], out)
        return out

    def r_of_x(x):
        x = np.asarray(x, dtype=float)
        r = np.interp(x, xt, rt)
        for _ in range(4):
            r = np.clip(r - (x_of_r(r) - x) / dxdr(r), r_lo, None)
        return r

    return x_of_r, r_of_x


def normalize_coordinates(metric: BackgroundMetric, r_match: float | None = None
                          ) -> CanonicalOperator:
    """Remove the dt dr cross term and pass to the tortoise variable.

    The time shift obeys a'(r) = -g^{tr}/g^{rr} and the tortoise map
    dx/dr = sqrt(-G^{tt}/g^{rr}) with G^{tt} the shifted tt-component.
    """
    if r_match is None:
        r_match = 4.0 * metric.mass if metric.mass > 0 else 4.0
    metric.check_decay()
    metric.check_spacelike()

    def shift_derivative(r):
        _, itr, irr = metric.inverse(r)
        return -itr / irr

    def dxdr_generic(r):
        itt, itr, irr = metric.inverse(r)
        Gtt = itt - itr * itr / irr
        return np.sqrt(-Gtt / irr)

    def F_generic(r):
        itt, itr, irr = metric.inverse(r)
        return -1.0 / (itt - itr * itr / irr)

    # exterior sample for monotonicity
    if metric.domain_kind == "exterior":
        r_lo = metric.r_inner * (1.0 + 1e-14)
    else:
        r_lo = 1e-6
    sample = np.geomspace(r_lo, 1e6, 2000)
    with np.errstate(invalid="ignore", divide="ignore"):
        k = dxdr_generic(sample)
    if not np.all(np.isfinite(k) & (k > 0)):
        bad = sample[np.argmax(~(np.isfinite(k) & (k > 0)))]
        raise NonMonotoneTortoise(f"dr*/dr <= 0 at r = {bad:.6g}")

    M = metric.mass
    rho = metric.areal_radius
    if metric.flat_coordinates:
        return CanonicalOperator(
            metric=metric, r_match=r_match,
            x_of_r=lambda r: np.asarray(r, dtype=float),
            r_of_x=lambda x: np.asarray(x, dtype=float) if np.ndim(x) else float(x),
            dxdr=lambda r: np.ones_like(np.asarray(r, dtype=float)),
            shift_derivative=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
            F=lambda r: np.ones_like(np.asarray(r, dtype=float)),
            rho=lambda r: np.asarray(r, dtype=float),
            rho_xx_over_rho=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
            sr_terms={"g00": _zero("g00"), **metric.short_range},
        )
    if metric.kind == "schwarzschild" and metric.g_tr.is_zero:
        def x_of_r(r):
            r = np.asarray(r, dtype=float)
            return r + 2.0 * M * np.log(r / (2.0 * M) - 1.0)

        return CanonicalOperator(
            metric=metric, r_match=r_match, x_of_r=x_of_r,
            r_of_x=lambda x: schwarzschild_r_of_x(x, M),
            dxdr=lambda r: 1.0 / (1.0 - 2.0 * M / np.asarray(r, dtype=float)),
            shift_derivative=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
            F=lambda r: 1.0 - 2.0 * M / np.asarray(r, dtype=float),
            rho=lambda r: np.asarray(r, dtype=float),
            rho_xx_over_rho=lambda r: (1.0 - 2.0 * M / np.asarray(r, dtype=float))
            * 2.0 * M / np.asarray(r, dtype=float) ** 3,
            sr_terms={"g00": _zero("g00"), **metric.short_range},
        )

    # generic path: numerical tortoise with x(r_ref) = r_ref
    r_ref = r_match if r_match > 1.01 * r_lo else 10.0 * r_lo
    r_edge = metric.r_inner if metric.domain_kind == "exterior" else 0.0
    x_of_r, r_of_x = _numeric_tortoise(dxdr_generic, r_lo, r_ref, r_edge=r_edge)

    def drdx(r):
        return 1.0 / dxdr_generic(r)

    def rho_xx_over_rho(r):
        # rho_xx = D (rho_rr D + rho_r D_r) with D = dr/dx
        r = np.asarray(r, dtype=float)
        step = np.minimum(1e-3 * (r - r_edge), 1e-2 * bracket(r))
        D = drdx(r)
        rho_r = diff_callable(rho, r, 1, step=step)
        rho_rr = diff_callable(rho, r, 2, step=step)
        D_r = diff_callable(drdx, r, 1, step=step)
        return D * (rho_rr * D + rho_r * D_r) / rho(r)

    return CanonicalOperator(
        metric=metric, r_match=r_match, x_of_r=x_of_r, r_of_x=r_of_x,
        dxdr=dxdr_generic, shift_derivative=shift_derivative, F=F_generic,
        rho=rho, rho_xx_over_rho=rho_xx_over_rho,
        sr_terms={"g00": _zero("g00"), **metric.short_range},
    )


def normalization_report(op: CanonicalOperator, r=None) -> str:
    """Text table with columns r, r*, weight, hrrtt residuals."""
    if r is None:
        r = np.geomspace(max(op.r_match, 1.0), 1e4, 25)
    r = np.asarray(r, dtype=float)
    res_diag, res_cross = op.hrrtt_residuals(r)
    lines = ["# r  r_star  weight  residual_tt_plus_xx  residual_tx"]
    for ri, xi, wi, a, b in zip(r, op.x_of_r(r), op.conjugation_weight(r), res_diag, res_cross):
        lines.append(f"{ri:.10e} {xi:.10e} {wi:.10e} {a:.3e} {b:.3e}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RadialGrid:
    """Uniform grid in the tortoise variable with areal radius attached."""

    x: np.ndarray
    r: np.ndarray
    drdx: np.ndarray
    h: float
    ell: int
    staggered: bool = False

    @property
    def n(self) -> int:
        return len(self.x)

    def index_of(self, x0: float) -> int:
        return int(np.argmin(np.abs(self.x - x0)))


@dataclass(frozen=True)
class ModePotential:
    """Reduced 1+1 problem for one spherical mode.

    ``left`` is ``"regular"`` for a regular centre at x = 0 (mode field odd
    with parity (-1)^(l+1)) or ``"horizon"`` for a left end radiating towards
    x -> -infinity.
    """

    ell: int
    V: Callable
    r_of_x: Callable
    drdx: Callable
    x_min: float
    x_max: float
    left: str
    label: str = ""
    mass: float = 0.0
    flat: bool = False

    def __call__(self, x):
        return self.V(x)

    def grid(self, h: float, x_max: float, x_min: float | None = None) -> RadialGrid:
        """Uniform grid of spacing ``h``.

        A regular centre without explicit ``x_min`` gets the staggered grid
        x_i = (i + 1/2) h; otherwise nodes start at ``x_min``.
        """
        if self.left == "regular" and x_min is None:
            n = int(round(x_max / h))
            x = (np.arange(n) + 0.5) * h
            staggered = True
        else:
            lo = self.x_min if x_min is None else x_min
            n = int(round((x_max - lo) / h)) + 1
            x = lo + h * np.arange(n)
            staggered = False
        r = np.asarray(self.r_of_x(x), dtype=float)
        return RadialGrid(x=x, r=r, drdx=np.asarray(self.drdx(x), dtype=float),
                          h=float(h), ell=self.ell, staggered=staggered)

    def with_extra(self, extra: Callable, label: str | None = None) -> "ModePotential":
        """Same mode with an additional potential (a function of x) added."""
        base = self.V

        def V(x):
            return base(x) + extra(x)

        return ModePotential(ell=self.ell, V=V, r_of_x=self.r_of_x, drdx=self.drdx,
                             x_min=self.x_min, x_max=self.x_max, left=self.left,
                             label=label or self.label + "+extra", mass=self.mass,
                             flat=False)


def mode_potential(op: CanonicalOperator, ell: int, x_min: float | None = None,
                   x_max: float = math.inf) -> ModePotential:
    """Reduced potential V_l(x) for the mode field phi = rho u_l."""
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    L = float(ell * (ell + 1))
    metric = op.metric
    label = f"{metric.kind}(M={metric.mass:g}) l={ell}"
    if metric.domain_kind == "exterior":
        left = "horizon"
        if x_min is None:
            x_min = -60.0 * (metric.mass if metric.mass > 0 else 1.0)
    else:
        left = "regular"
        x_min = 0.0 if x_min is None else x_min

    if metric.kind == "minkowski":
        if ell == 0:
            def V(x):
                return np.zeros_like(x) if np.ndim(x) else 0.0
        else:
            def V(x):
                return L / (x * x)
        return ModePotential(ell=ell, V=V, r_of_x=op.r_of_x,
                             drdx=lambda x: np.ones_like(np.asarray(x, dtype=float)),
                             x_min=x_min, x_max=x_max, left=left, label=label,
                             flat=(ell == 0))

    if metric.kind == "schwarzschild" and metric.g_tr.is_zero:
        M = metric.mass

        def V(x):
            if np.ndim(x) == 0:
                r = schwarzschild_r_of_x(float(x), M)
                return (1.0 - 2.0 * M / r) * (L / (r * r) + 2.0 * M / r ** 3)
            r = schwarzschild_r_of_x(x, M)
            return (1.0 - 2.0 * M / r) * (L / (r * r) + 2.0 * M / r ** 3)

        def drdx(x):
            r = schwarzschild_r_of_x(x, M)
            return 1.0 - 2.0 * M / r

        return ModePotential(ell=ell, V=V, r_of_x=op.r_of_x, drdx=drdx, x_min=x_min,
                             x_max=x_max, left=left, label=label, mass=M)

    if metric.flat_coordinates:
        def V(x):
            if np.ndim(x) == 0:
                x = float(x)
                return L / (x * x) + float(metric.scalar_potential(np.asarray([x]))[0])
            x = np.asarray(x, dtype=float)
            return L / (x * x) + metric.scalar_potential(x)

        return ModePotential(ell=ell, V=V, r_of_x=op.r_of_x,
                             drdx=lambda x: np.ones_like(np.asarray(x, dtype=float)),
                             x_min=x_min, x_max=x_max, left=left, label=label)

    def W(r):
        return op.rho_xx_over_rho(r) + op.F(r) * (L / op.rho(r) ** 2
                                                   + metric.scalar_potential(r))

    def V(x):
        if np.ndim(x) == 0:
            return float(W(np.asarray([op.r_of_x(np.asarray([float(x)]))[0]]))[0])
        return W(op.r_of_x(np.asarray(x, dtype=float)))

    def drdx(x):
        return 1.0 / op.dxdr(op.r_of_x(np.asarray(x, dtype=float)))

    return ModePotential(ell=ell, V=V, r_of_x=op.r_of_x, drdx=drdx, x_min=x_min,
                         x_max=x_max, left=left, label=label, mass=metric.mass)
