"""Method-of-lines evolution of a single spherical mode in the tortoise variable."""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import CausalityViolation, CFLViolation, NaNDetected
from ..geometry import ModePotential, RadialGrid
from . import _backend, _fallback

# classical RK4 is stable on the imaginary axis up to 2 sqrt(2); with the
# estimate omega^2 = D2_RADIUS / h^2 + max V this bound stays below the measured
# limit of the assembled operator (parity-ghost centre, l = 0, 1, 2)
RK4_IMAG_LIMIT = 2.8
# spectral radius of h^2 D2 for the interior fourth-order stencil
D2_RADIUS = 16.0 / 3.0
BOUNDARY_KINDS = ("outflow", "reflecting")
DATA_KINDS = ("static", "velocity", "mixed", "outgoing", "ingoing")


@dataclass(frozen=True)
class WaveState:
    """Mode field phi = rho u and its time derivative on a radial grid."""

    phi: np.ndarray
    pi: np.ndarray
    grid: RadialGrid
    time: float = 0.0

    def __post_init__(self):
        if self.phi.shape != self.grid.x.shape or self.pi.shape != self.grid.x.shape:
            raise ValueError("phi and pi must match the grid")

    def copy(self) -> "WaveState":
        return replace(self, phi=self.phi.copy(), pi=self.pi.copy())


@dataclass(frozen=True)
class EvolutionConfig:
    """Run parameters.

    ``snapshot_every`` is a time interval (0 disables full-grid snapshots);
    ``snapshot_window`` restricts the stored part of the grid. With
    ``clean=True`` every observer must satisfy x_obs + t_final < x_max so
    the outer boundary can never influence the recorded series.
    """

    x_max: float
    t_final: float
    h: float = 0.1
    x_min: float | None = None
    cfl: float = 0.5
    observers: tuple = (10.0,)
    boundary: str = "outflow"
    snapshot_every: float = 0.0
    snapshot_window: tuple | None = None
    clean: bool = True

    def __post_init__(self):
        object.__setattr__(self, "observers", tuple(float(o) for o in self.observers))
        if self.boundary not in BOUNDARY_KINDS:
            raise ValueError(f"boundary must be one of {BOUNDARY_KINDS}")
        if self.h <= 0 or self.t_final < 0:
            raise ValueError("h must be positive and t_final nonnegative")

    @property
    def nsteps(self) -> int:
        return int(np.ceil(self.t_final / (self.cfl * self.h) - 1e-9))

    @property
    def dt(self) -> float:
        n = self.nsteps
        return self.t_final / n if n else self.cfl * self.h

    def validate(self, pot: ModePotential, grid: RadialGrid) -> None:
        if not 0 < self.cfl <= 0.9:
            raise CFLViolation(f"CFL factor {self.cfl} outside (0, 0.9]")
        vmax = float(np.max(np.abs(pot(grid.x))))
        omega = np.sqrt(D2_RADIUS / self.h ** 2 + vmax)
        if self.dt * omega > RK4_IMAG_LIMIT:
            raise CFLViolation(
                f"dt*omega_max = {self.dt * omega:.3f} exceeds {RK4_IMAG_LIMIT} "
                f"(potential peak {vmax:.3g} is stiff at h = {self.h})")
        for xo in self.observers:
            if not grid.x[1] <= xo <= grid.x[-3]:
                raise ValueError(f"observer {xo} outside the grid interior")
            if self.clean and xo + self.t_final >= grid.x[-1]:
                raise CausalityViolation(
                    f"observer {xo}: x_obs + t_final = {xo + self.t_final:g} "
                    f">= x_max = {grid.x[-1]:g}")


@dataclass
class EvolutionResult:
    """Observer series and optional snapshots of one run."""

    times: np.ndarray
    observers: np.ndarray
    phi: np.ndarray          # (nt, nobs)
    pi: np.ndarray           # (nt, nobs)
    grid: RadialGrid
    config: EvolutionConfig
    final: WaveState
    snapshot_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    snapshot_x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    snapshots: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    backend: str = ""
    wall_time: float = 0.0
    label: str = ""
    mass: float = 0.0
    rho_of_x: object = None

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    def series(self, i: int = 0, which: str = "phi") -> tuple[np.ndarray, np.ndarray]:
        data = self.phi if which == "phi" else self.pi
        return self.times, data[:, i]


def grid_for(pot: ModePotential, cfg: EvolutionConfig) -> RadialGrid:
    return pot.grid(cfg.h, cfg.x_max, cfg.x_min)


def _left_mode(pot: ModePotential, grid: RadialGrid, boundary: str) -> tuple[int, float]:
    if grid.staggered:
        return 2, float((-1) ** (pot.ell + 1))
    return (0 if boundary == "outflow" else 1), 0.0


def observer_stencil(grid: RadialGrid, xs) -> tuple[np.ndarray, np.ndarray]:
    """Four-point Lagrange interpolation indices and weights per observer."""
    x0, h, n = grid.x[0], grid.h, grid.n
    idx = np.zeros((len(xs), 4), dtype=np.intp)
    w = np.zeros((len(xs), 4))
    for o, xo in enumerate(xs):
        s = (xo - x0) / h
        i = int(np.floor(s + 1e-12))
        if abs(s - round(s)) < 1e-12:
            j = int(round(s))
            j0 = min(max(j - 1, 0), n - 4)
            idx[o] = np.arange(j0, j0 + 4)
            w[o, j - j0] = 1.0
            continue
        j0 = min(max(i - 1, 0), n - 4)
        nodes = np.arange(j0, j0 + 4)
        idx[o] = nodes
        for a in range(4):
            others = np.delete(nodes, a)
            w[o, a] = np.prod((s - others) / (nodes[a] - others))
    return idx, w


def quadrature_weights(grid: RadialGrid, left_mode: int) -> np.ndarray:
    """Diagonal of the SBP norm H (includes the factor h)."""
    hd = np.ones(grid.n)
    if left_mode != 2:
        hd[:4] = _fallback.H_DIAG
    hd[-4:] = _fallback.H_DIAG[::-1]
    return grid.h * hd


def energy(state: WaveState, V, boundary_left: int = 0, parity: float = 0.0) -> float:
    """Discrete energy 1/2 pi^T H pi + 1/2 phi^T M phi + 1/2 phi^T H V phi.

    ``M`` is the symmetric part of the SBP operator, obtained here through
    the reflecting variant of the right-hand side: H D2_refl = -M.
    """
    grid = state.grid
    hw = quadrature_weights(grid, boundary_left)
    V = np.asarray(V, dtype=float)
    lm = 2 if boundary_left == 2 else 1
    lap = _fallback.rhs(state.phi, np.zeros_like(state.phi), np.zeros_like(V), grid.h,
                        lm, 1, parity)
    stiff = -float(np.dot(state.phi * hw, lap))
    return 0.5 * float(np.dot(hw * state.pi, state.pi)) + 0.5 * stiff \
        + 0.5 * float(np.dot(hw * V * state.phi, state.phi))


def gaussian_profile(x, center: float, width: float, amplitude: float = 1.0):
    return amplitude * np.exp(-((x - center) / width) ** 2)


def bump_profile(x, center: float, half_width: float, amplitude: float = 1.0):
    """C-infinity bump exp(1 - 1/(1 - s^2)) with support |x - center| < half_width."""
    s = (np.asarray(x, dtype=float) - center) / half_width
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return amplitude * out


def initial_data(grid: RadialGrid, profile, dprofile=None, kind: str = "mixed") -> WaveState:
    """Build Cauchy data from a profile f(x).

    kinds: ``static`` (phi = f, pi = 0), ``velocity`` (phi = 0, pi = f),
    ``mixed`` (phi = pi = f), ``outgoing`` (phi = f, pi = -f'),
    ``ingoing`` (phi = f, pi = f').
    """
    if kind not in DATA_KINDS:
        raise ValueError(f"kind must be one of {DATA_KINDS}")
    f = np.asarray(profile(grid.x), dtype=float)
    zero = np.zeros_like(f)
    if kind in ("outgoing", "ingoing"):
        if dprofile is None:
            raise ValueError("travelling data needs the profile derivative")
        df = np.asarray(dprofile(grid.x), dtype=float)
        return WaveState(f, -df if kind == "outgoing" else df, grid)
    if kind == "static":
        return WaveState(f, zero, grid)
    if kind == "velocity":
        return WaveState(zero, f.copy(), grid)
    return WaveState(f, f.copy(), grid)


def gaussian_data(grid: RadialGrid, center: float = 20.0, width: float = 2.0,
                  amplitude: float = 1.0, kind: str = "mixed") -> WaveState:
    """Gaussian of the given width centred at ``center`` (tortoise units)."""
    def f(x):
        return gaussian_profile(x, center, width, amplitude)

    def df(x):
        return -2.0 * (x - center) / width ** 2 * f(x)

    return initial_data(grid, f, df, kind)


def evolve(pot: ModePotential, data: WaveState, cfg: EvolutionConfig,
           backend: str | None = None) -> EvolutionResult:
    """Integrate phi_tt = phi_xx - V phi from ``data`` to ``cfg.t_final``.

    Raises CFLViolation, CausalityViolation (clean mode) or NaNDetected with
    the first step that produced a non-finite value.
    """
    grid = data.grid
    cfg.validate(pot, grid)
    run, name = _backend.get_backend(backend)
    lm, parity = _left_mode(pot, grid, cfg.boundary)
    rm = 0 if cfg.boundary == "outflow" else 1
    V = np.ascontiguousarray(pot(grid.x), dtype=float)
    nsteps, dt = cfg.nsteps, cfg.dt
    idx, w = observer_stencil(grid, cfg.observers)
    nobs = len(cfg.observers)
    out_phi = np.zeros((nsteps + 1, nobs))
    out_pi = np.zeros((nsteps + 1, nobs))

    snap_every = 0
    lo, hi = 0, grid.n
    if cfg.snapshot_every > 0:
        snap_every = max(1, int(round(cfg.snapshot_every / dt)))
        if cfg.snapshot_window is not None:
            lo = int(np.searchsorted(grid.x, cfg.snapshot_window[0]))
            hi = int(np.searchsorted(grid.x, cfg.snapshot_window[1], side="right"))
    nsnap = nsteps // snap_every + 1 if snap_every else 1
    snaps = np.zeros((nsnap, hi - lo if snap_every else 1))

    phi = np.ascontiguousarray(data.phi, dtype=float).copy()
    pi = np.ascontiguousarray(data.pi, dtype=float).copy()
    t0 = _time.perf_counter()
    bad = run(phi, pi, V, grid.h, dt, nsteps, lm, rm, parity, idx, w,
              out_phi, out_pi, snap_every, lo, hi, snaps)
    wall = _time.perf_counter() - t0
    if bad >= 0:
        raise NaNDetected(bad)

    times = data.time + dt * np.arange(nsteps + 1)
    res = EvolutionResult(times=times, observers=np.array(cfg.observers), phi=out_phi,
                          pi=out_pi, grid=grid, config=cfg,
                          final=WaveState(phi, pi, grid, data.time + nsteps * dt),
                          backend=name, wall_time=wall, label=pot.label, mass=pot.mass,
                          rho_of_x=pot.r_of_x)
    if snap_every:
        res.snapshot_times = data.time + dt * snap_every * np.arange(nsnap)
        res.snapshot_x = grid.x[lo:hi].copy()
        res.snapshots = snaps
    return res
