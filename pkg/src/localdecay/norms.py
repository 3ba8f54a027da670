"""Dyadic partitions and weighted local-energy norms on mode fields.

Fields are stored as the mode field ``phi = r u`` sampled on a uniform grid in
the tortoise variable x. For one spherical harmonic (normalized in
L^2(S^2)) the three-dimensional measure reduces to

    int |u|^2 r^2 dr = int |phi|^2 (dr/dx) dx,

so every norm below is a weighted one-dimensional quadrature in x. Shells are
A_k = {<r> in [2^k, 2^(k+1))} with sharp indicators.

Derivatives of a single mode are realized through norm-equivalent
magnitudes: for the j-th order derivative

    |d^j u|^2 = sum_{a=0..j} (l(l+1))^a |d_r^(j-a) u|^2 / r^(2a),

which is exact for j <= 1 (gradient) and equivalent for higher j.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from ._fd import diff_uniform
from .errors import EmptyShell, UnderResolved
from .geometry import RadialGrid, bracket

__all__ = [
    "GriddedField",
    "DyadicPartition",
    "VectorFieldAlgebra",
    "le_norm",
    "le_dual_norm",
    "le1_norm",
    "le_tau_norm",
    "z_norm",
    "weak_le_norm",
    "smooth_bump",
    "derivative_density",
    "norm_report",
]


@dataclass(frozen=True)
class GriddedField:
    """Samples of a mode field on a radial grid.

    ``values`` has shape (nx,) for a spatial slice or (nt, nx) for a
    space-time window with time spacing ``dt``.
    """

    values: np.ndarray
    grid: RadialGrid
    dt: float | None = None
    tau: complex | None = None

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape[-1] != self.grid.n:
            raise ValueError("field and grid sizes differ")
        if v.ndim == 2 and self.dt is None:
            raise ValueError("space-time field needs dt")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")

    @classmethod
    def from_u(cls, u, grid: RadialGrid, **kw) -> "GriddedField":
        """Build from the 3-D profile u (mode field is r u)."""
        return cls(np.asarray(u) * grid.r, grid, **kw)

    @property
    def is_spacetime(self) -> bool:
        return np.ndim(self.values) == 2

    @property
    def u(self) -> np.ndarray:
        return _profile(np.asarray(self.values), self.grid)

    def __mul__(self, lam):
        return GriddedField(np.asarray(self.values) * lam, self.grid, self.dt, self.tau)

    __rmul__ = __mul__

    def __add__(self, other: "GriddedField"):
        return GriddedField(np.asarray(self.values) + np.asarray(other.values),
                            self.grid, self.dt, self.tau)


def _profile(phi: np.ndarray, grid: RadialGrid) -> np.ndarray:
    r = grid.r
    with np.errstate(divide="ignore", invalid="ignore"):
        u = phi / r
    bad = r <= 0
    if np.any(bad):
        # regular centre: u(0) from the first interior samples
        idx = np.flatnonzero(bad)
        good = np.flatnonzero(~bad)[:2]
        slope = (u[..., good[1]] - u[..., good[0]]) / (r[good[1]] - r[good[0]])
        for i in idx:
            u[..., i] = u[..., good[0]] + slope * (r[i] - r[good[0]])
    return u


def smooth_bump(r, lo: float, hi: float, dilate: float = 1.5):
    """C-infinity cutoff equal to 1 on [lo, hi], supported in its dilate.

    The dilate is the interval with the same centre and ``dilate`` times the
    half-width.
    """
    r = np.asarray(r, dtype=float)
    if hi <= lo:
        return np.zeros_like(r)
    c, w = 0.5 * (lo + hi), 0.5 * (hi - lo)
    W = dilate * w
    s = np.abs(r - c)
    t = np.clip((W - s) / (W - w), 0.0, 1.0)

    def psi(z):
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(z > 0, np.exp(-1.0 / np.where(z > 0, z, 1.0)), 0.0)

    return psi(t) / (psi(t) + psi(1.0 - t))


class DyadicPartition:
    """Sharp dyadic shells of a radial grid with their quadrature.

    Shells run from k_min = floor(log2 <r_min>) to k_max = floor(log2 <r_max>).
    On each shell a sampled function is replaced by its piecewise-cubic
    interpolant built from the nodes inside the shell only (extrapolated
    into the partial cells at the shell edges) and squared moduli or
    products are integrated exactly. The resulting quadratic forms are
    positive semidefinite, fourth-order accurate for functions smooth inside
    the shell, and unaffected by jumps at shell edges.
    """

    def __init__(self, grid: RadialGrid, warn: bool = True):
        self.grid = grid
        x, r = grid.x, grid.r
        br = bracket(r)
        self.bracket = br
        self.k_min = int(math.floor(math.log2(br.min())))
        self.k_max = int(math.floor(math.log2(br.max())))
        spline = CubicSpline(x, r) if len(x) > 3 else None
        self.shells: list[tuple[int, float, float]] = []
        self._rules: dict[int, _ShellRule] = {}
        self.empty: list[int] = []
        for k in range(self.k_min, self.k_max + 1):
            a = self._x_at(np.sqrt(max(4.0 ** k - 4.0, 0.0)), spline)
            b = self._x_at(np.sqrt(4.0 ** (k + 1) - 4.0), spline)
            a, b = max(a, x[0]), min(b, x[-1])
            self.shells.append((k, a, b))
            rule = _ShellRule.build(x, grid.h, a, b)
            if rule is None:
                self.empty.append(k)
            else:
                self._rules[k] = rule
        if self.empty and warn:
            warnings.warn(f"dyadic shells {self.empty} contain no grid points", EmptyShell,
                          stacklevel=2)

    def _x_at(self, r_target: float, spline) -> float:
        x, r = self.grid.x, self.grid.r
        if r_target <= r[0]:
            return -math.inf
        if r_target >= r[-1]:
            return math.inf
        i = int(np.searchsorted(r, r_target))
        lo, hi = x[max(i - 1, 0)], x[min(i, len(x) - 1)]
        if spline is None or lo == hi:
            return float(np.interp(r_target, r, x))
        return brentq(lambda s: float(spline(s)) - r_target, lo, hi, xtol=1e-14)

    @property
    def ks(self) -> list[int]:
        return [k for k, _, _ in self.shells if k in self._rules]

    def shell_of(self, k: int) -> tuple[float, float]:
        for kk, a, b in self.shells:
            if kk == k:
                return a, b
        raise KeyError(k)

    def node_range(self, k: int) -> tuple[int, int]:
        """Half-open index range of grid nodes inside shell k."""
        rule = self._rules[k]
        return rule.i0, rule.i0 + rule.m

    def sesquilinear(self, a: np.ndarray, b: np.ndarray,
                     time_weights: np.ndarray | None = None) -> dict[int, complex]:
        """Per-shell integral of a * conj(b) (last axis = x)."""
        out = {}
        for k in self.ks:
            val = self._rules[k].apply(a, b)
            if time_weights is not None:
                val = time_weights @ val
            out[k] = complex(np.sum(val))
        return out

    def shell_sq(self, g: np.ndarray, time_weights: np.ndarray | None = None
                 ) -> dict[int, float]:
        """Per-shell integral of |g|^2."""
        return {k: max(v.real, 0.0) for k, v in self.sesquilinear(g, g, time_weights).items()}


def _gram(nodes: np.ndarray, p: float, q: float) -> np.ndarray:
    """Gram matrix int_p^q L_k L_l ds of the Lagrange basis on ``nodes``."""
    deg = len(nodes)
    o = nodes[0]
    nodes, p, q = nodes - o, p - o, q - o
    V = np.vander(nodes, deg, increasing=True)
    C = np.linalg.inv(V)  # column k: monomial coefficients of L_k
    mom = np.array([(q ** (n + 1) - p ** (n + 1)) / (n + 1) for n in range(2 * deg - 1)])
    H = np.array([[mom[i + j] for j in range(deg)] for i in range(deg)])
    G = C.T @ H @ C
    return 0.5 * (G + G.T)


@dataclass
class _ShellRule:
    i0: int
    m: int
    h: float
    deg: int
    interior: tuple[int, int] | None  # window starts [lo, hi) using G_int
    G_int: np.ndarray | None
    edges: list  # (window start, Gram)

    @classmethod
    def build(cls, x: np.ndarray, h: float, a: float, b: float, order: int = 4):
        n = len(x)
        if not b > a:
            return None
        i0 = int(np.searchsorted(x, a, side="left"))
        i1 = int(np.searchsorted(x, b, side="left")) - 1
        if i0 >= n or i1 < 0 or i0 > i1:
            return None
        m = i1 - i0 + 1
        s = (x[i0:i1 + 1] - x[i0]) / h
        sa, sb = (a - x[i0]) / h, (b - x[i0]) / h
        if m == 1:
            return cls(i0, 1, h, 1, None, None, [(0, np.array([[sb - sa]]))])
        deg = min(order, m)
        half = deg // 2 - 1

        def start(c):
            return int(min(max(c - half, 0), m - deg))

        edges = []
        if sa < 0:
            j0 = start(0)
            edges.append((j0, _gram(s[j0:j0 + deg], sa, 0.0)))
        interior_cells = []
        for c in range(m - 1):
            j0 = start(c)
            if deg == order and j0 == c - half:
                interior_cells.append(j0)
            else:
                edges.append((j0, _gram(s[j0:j0 + deg], s[c], s[c + 1])))
        if sb > s[-1]:
            j0 = start(m - 1)
            edges.append((j0, _gram(s[j0:j0 + deg], s[-1], sb)))
        if interior_cells:
            lo, hi = interior_cells[0], interior_cells[-1] + 1
            G_int = _gram(np.arange(deg, dtype=float), half, half + 1.0)
            return cls(i0, m, h, deg, (lo, hi), G_int, edges)
        return cls(i0, m, h, deg, None, None, edges)

    def apply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        A = a[..., self.i0:self.i0 + self.m]
        B = b[..., self.i0:self.i0 + self.m]
        acc = np.zeros(A.shape[:-1], dtype=np.result_type(A, B, complex))
        if self.interior is not None:
            lo, hi = self.interior
            WA = np.lib.stride_tricks.sliding_window_view(A, self.deg, axis=-1)[..., lo:hi, :]
            WB = np.lib.stride_tricks.sliding_window_view(B, self.deg, axis=-1)[..., lo:hi, :]
            acc = acc + np.einsum("...ck,kl,...cl->...", WA, self.G_int, np.conj(WB))
        for j0, G in self.edges:
            d = G.shape[0]
            acc = acc + np.einsum("...k,kl,...l->...", A[..., j0:j0 + d], G,
                                  np.conj(B[..., j0:j0 + d]))
        return self.h * acc


def _time_weights(nt: int, dt: float) -> np.ndarray:
    w = np.full(nt, dt)
    if nt > 1:
        w[0] = w[-1] = 0.5 * dt
    return w


def _radial_derivatives(u: np.ndarray, grid: RadialGrid, jmax: int) -> list[np.ndarray]:
    """[u, u_r, u_rr, ...] along the last axis, via 4th-order stencils in x."""
    out = [u]
    cur = u
    for _ in range(jmax):
        cur = diff_uniform(cur, grid.h, 1, 4) / grid.drdx
        out.append(cur)
    return out


def derivative_density(field: GriddedField, j: int, u: np.ndarray | None = None) -> np.ndarray:
    """r |d^j u| on the grid (squared, it integrates against dr/dx dx)."""
    grid = field.grid
    if u is None:
        u = field.u
    if j == 0:
        return np.abs(u) * grid.r
    L = grid.ell * (grid.ell + 1)
    ders = _radial_derivatives(u, grid, j)
    tot = np.zeros(np.shape(u))
    for a in range(j + 1):
        term = np.abs(ders[j - a]) ** 2
        if a:
            term = term * (L ** a) / grid.r ** (2 * a)
        tot = tot + term
    return np.sqrt(tot) * grid.r


def _shell_norms(density: np.ndarray, field: GriddedField, part: DyadicPartition,
                 power: float) -> dict[int, float]:
    g = density * np.sqrt(part.grid.drdx * part.bracket ** power)
    tw = _time_weights(g.shape[0], field.dt) if g.ndim == 2 else None
    return {k: math.sqrt(v) for k, v in part.shell_sq(g, tw).items()}


def _sup(d: dict) -> float:
    return max(d.values()) if d else 0.0


def _sum(d: dict) -> float:
    # fixed order pairwise summation
    return float(math.fsum(d[k] for k in sorted(d)))


def le_norm(u: GriddedField, part: DyadicPartition, m: int = 0) -> float:
    """sup_k ||<r>^{-1/2} d^j u||_{L^2(A_k)}, summed over j <= m.

    Spatial slices give the spatial norm, (nt, nx) fields the space-time one.
    """
    prof = u.u
    return float(math.fsum(
        _sup(_shell_norms(derivative_density(u, j, prof), u, part, -1.0))
        for j in range(m + 1)))


def le_dual_norm(f: GriddedField, part: DyadicPartition, m: int = 0) -> float:
    """sum_k ||<r>^{1/2} d^j f||_{L^2(A_k)}, summed over j <= m."""
    prof = f.u
    return float(math.fsum(
        _sum(_shell_norms(derivative_density(f, j, prof), f, part, 1.0))
        for j in range(m + 1)))


def le1_norm(u: GriddedField, part: DyadicPartition) -> float:
    """||grad u||_LE + ||<r>^{-1} u||_LE."""
    prof = u.u
    grad = derivative_density(u, 1, prof)
    low = derivative_density(u, 0, prof) / part.bracket
    return _sup(_shell_norms(grad, u, part, -1.0)) + _sup(_shell_norms(low, u, part, -1.0))


def weak_le_norm(u: GriddedField, chi_region: Sequence[float] | None,
                 part: DyadicPartition, dilate: float = 1.5) -> float:
    """||(1 - chi) grad u||_LE + ||<r>^{-1} u||_LE with chi = 1 on chi_region."""
    prof = u.u
    r = part.grid.r
    if chi_region is None:
        chi = np.zeros_like(r)
    else:
        chi = smooth_bump(r, chi_region[0], chi_region[1], dilate)
    grad = (1.0 - chi) * derivative_density(u, 1, prof)
    low = derivative_density(u, 0, prof) / part.bracket
    return _sup(_shell_norms(grad, u, part, -1.0)) + _sup(_shell_norms(low, u, part, -1.0))


def le_tau_norm(v: GriddedField, tau: complex, m: int, part: DyadicPartition) -> float:
    """Frequency-dependent norm

    ||(|tau| + <r>^-1) v||_{LE^m} + ||grad v||_{LE^m}
    + ||(|tau| + <r>^-1)^-1 grad^2 v||_{LE^m}.
    """
    at = abs(tau)
    if at > 0 and part.grid.h > 0.1 / at:
        raise UnderResolved(f"grid spacing {part.grid.h} exceeds 0.1/|tau| = {0.1 / at:.3g}")
    prof = v.u
    wt = at + 1.0 / part.bracket
    dens = [derivative_density(v, j, prof) for j in range(m + 3)]
    total = []
    for j in range(m + 1):
        total.append(_sup(_shell_norms(wt * dens[j], v, part, -1.0)))
        total.append(_sup(_shell_norms(dens[j + 1], v, part, -1.0)))
        total.append(_sup(_shell_norms(dens[j + 2] / wt, v, part, -1.0)))
    return float(math.fsum(total))


@dataclass(frozen=True)
class VectorFieldAlgebra:
    """Vector fields acting on a single spherical mode.

    Rotations act through the eigenvalue relation, so Omega^j is the scalar
    (l(l+1))^(j/2). Translations T^i are realized by the i-th derivative
    magnitude (see :func:`derivative_density`), the time derivative by
    multiplication with i tau in frequency domain or by finite differences
    along the time axis.
    """

    ell: int
    tau: complex | None = None

    def omega_factor(self, j: int) -> float:
        return float(self.ell * (self.ell + 1)) ** (0.5 * j)

    def radial_scaling(self, u: np.ndarray, grid: RadialGrid, k: int = 1) -> np.ndarray:
        """(r d_r)^k u on the grid."""
        out = u
        for _ in range(k):
            out = grid.r * diff_uniform(out, grid.h, 1, 4) / grid.drdx
        return out

    def time_derivative(self, field: GriddedField) -> np.ndarray:
        """T = d_t: i tau v in frequency domain, 4th-order stencil in time domain."""
        if field.is_spacetime:
            return diff_uniform(np.asarray(field.values), field.dt, 1, 4, axis=0)
        tau = field.tau if field.tau is not None else self.tau
        if tau is None:
            raise ValueError("spatial field needs a frequency for the time derivative")
        return 1j * tau * np.asarray(field.values)

    def scaling(self, family: Sequence[GriddedField], taus: Sequence[float], idx: int
                ) -> np.ndarray:
        """S = -tau d_tau + r d_r at member ``idx`` of a tau-family of mode fields.

        The tau derivative uses the three-point nonuniform stencil.
        """
        taus = np.asarray(taus, dtype=float)
        vals = [np.asarray(f.u) for f in family]
        n = len(taus)
        if n < 3:
            raise ValueError("need at least three members")
        i = min(max(idx, 1), n - 2)
        t0, t1, t2 = taus[i - 1], taus[i], taus[i + 1]
        x = taus[idx]
        # Lagrange derivative at x
        l0 = (2 * x - t1 - t2) / ((t0 - t1) * (t0 - t2))
        l1 = (2 * x - t0 - t2) / ((t1 - t0) * (t1 - t2))
        l2 = (2 * x - t0 - t1) / ((t2 - t0) * (t2 - t1))
        dtau = l0 * vals[i - 1] + l1 * vals[i] + l2 * vals[i + 1]
        grid = family[idx].grid
        return -x * dtau + self.radial_scaling(vals[idx], grid, 1)


def z_norm(f: GriddedField, m: int, n: float, alg: VectorFieldAlgebra,
           part: DyadicPartition, return_table: bool = False):
    """sup over i + j + k <= m of ||<r>^n T^i Omega^j S_r^k f||_{LE*}."""
    if f.is_spacetime:
        raise ValueError("z_norm expects a spatial slice")
    u0 = f.u
    grid = f.grid
    table = {}
    scaled = [u0]
    for k in range(1, m + 1):
        scaled.append(alg.radial_scaling(scaled[-1], grid, 1))
    br_n = part.bracket ** n
    for k in range(m + 1):
        for j in range(m + 1 - k):
            for i in range(m + 1 - k - j):
                dens = derivative_density(f, i, scaled[k]) * alg.omega_factor(j) * br_n
                table[(i, j, k)] = _sum(_shell_norms(dens, f, part, 1.0))
    value = max(table.values())
    return (value, table) if return_table else value


def norm_report(rows: Sequence[tuple[str, str, float]]) -> str:
    """Columnar text: name, parameters, value."""
    lines = ["# norm  parameters  value"]
    for name, params, value in rows:
        lines.append(f"{name}\t{params}\t{value:.12e}")
    return "\n".join(lines) + "\n"
