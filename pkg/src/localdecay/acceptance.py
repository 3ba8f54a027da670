"""The acceptance checks as reusable functions.

Each check runs one experiment and returns a :class:`CheckResult` with the
measured quantities and a pass flag against the default tolerance. The test
suite and the ``acceptance`` campaign stage both call into this module; the
tests re-assert the thresholds on the measured numbers themselves.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .evolve import (EvolutionConfig, EvolutionResult, cone_profile, convergence_study,
                     evolve, fit_decay, gaussian_data)
from .evolve.core import grid_for
from .geometry import BackgroundMetric, ModePotential, mode_potential, normalize_coordinates
from .norms import GriddedField
from .resolvent import (DEFAULT_SWEEP, energy_bound, le_tau_bound_monitor, low_freq_expansion,
                        radiation_check, resolvent_apply, resolvent_apply_batch, zero_resolvent)
from .synthesis import plan_for, synthesize


@dataclass
class CheckResult:
    key: str
    title: str
    passed: bool
    measured: dict = field(default_factory=dict)
    detail: str = ""
    wall_time: float = 0.0

    def line(self) -> str:
        vals = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"{'PASS' if self.passed else 'FAIL'}  {self.key:<18s} {self.title}: {vals}"


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def schwarzschild(ell: int, mass: float = 1.0) -> ModePotential:
    return mode_potential(normalize_coordinates(BackgroundMetric.schwarzschild(mass)), ell)


def minkowski(ell: int) -> ModePotential:
    return mode_potential(normalize_coordinates(BackgroundMetric.minkowski()), ell)


# late-time tails ----------------------------------------------------------

def price_run(h: float = 0.05, t_final: float = 2000.0, x_min: float = -150.0,
              observer: float = 10.0, snapshot_every: float = 10.0) -> EvolutionResult:
    """Schwarzschild (M = 1) l = 0 run from mixed Gaussian data at x = 20.

    Snapshots over x >= 0 feed the light-cone check.
    """
    pot = schwarzschild(0)
    x_max = observer + t_final + 20.0
    cfg = EvolutionConfig(x_max=x_max, t_final=t_final, h=h, x_min=x_min,
                          observers=(observer,), snapshot_every=snapshot_every,
                          snapshot_window=(0.0, x_max))
    return evolve(pot, gaussian_data(grid_for(pot, cfg), 20.0, 2.0), cfg)


def price_tail(run: EvolutionResult, window=(200.0, 2000.0), target: float = 3.0,
               tol: float = 0.15, max_drift: float = 0.1) -> CheckResult:
    t, y = run.series(0)
    f = fit_decay(t, y, window)
    ok = abs(f.p - target) <= tol and f.drift < max_drift
    return CheckResult("price_tail", "l=0 tail exponent at the observer", ok,
                       {"p": f.p, "lld_drift": f.drift, "window": list(window)}, f.summary())


def derivative_tail(run: EvolutionResult, window=(200.0, 2000.0), target: float = 4.0,
                    tol: float = 0.2) -> CheckResult:
    t, y = run.series(0, "pi")
    f = fit_decay(t, y, window)
    return CheckResult("derivative_tail", "time-derivative tail exponent",
                       abs(f.p - target) <= tol, {"p": f.p}, f.summary())


def cone_bound(run: EvolutionResult, offsets=(20.0, 50.0, 100.0),
               max_ratio: float = 1.5) -> CheckResult:
    ratios = []
    for c in offsets:
        cp = cone_profile(run.snapshot_times, run.snapshot_x, run.snapshots, run.rho_of_x, c)
        ratios.append(cp.growth_ratio())
    worst = max(ratios)
    return CheckResult("cone_bound", "weighted amplitude along outgoing rays", worst < max_ratio,
                       {"ratios": ratios, "worst": worst})


def huygens(h: float = 0.05, t_final: float = 200.0, t_after: float = 50.0,
            limit: float = 1e-10) -> CheckResult:
    """Minkowski l = 0: nothing is left at the observer once the pulse has passed."""
    pot = minkowski(0)
    cfg = EvolutionConfig(x_max=t_final + 60.0, t_final=t_final, h=h, observers=(10.0,))
    run = evolve(pot, gaussian_data(grid_for(pot, cfg), 20.0, 2.0), cfg)
    t, y = run.series(0)
    amp = float(np.max(np.abs(y[t >= t_after])))
    return CheckResult("huygens", "flat l=0 amplitude after the pulse", amp < limit,
                       {"max_abs": amp, "t_after": t_after})


# frequency domain ----------------------------------------------------------

def flat_green_apply(tau: float, g: Callable, x, support, limit: int = 400) -> np.ndarray:
    """Quadrature of the exact flat l = 0 outgoing kernel against g.

    G(x, y) = -sin(tau min(x, y)) exp(-i tau max(x, y)) / tau.
    """
    a, b = support
    out = np.empty(len(x), complex)
    for i, xx in enumerate(x):
        def k(y, part):
            val = -math.sin(tau * min(xx, y)) * np.exp(-1j * tau * max(xx, y)) / tau * g(y)
            return val.real if part == 0 else val.imag
        pts = [p for p in (xx,) if a < p < b]
        re = quad(k, a, b, args=(0,), points=pts or None, limit=limit)[0]
        im = quad(k, a, b, args=(1,), points=pts or None, limit=limit)[0]
        out[i] = re + 1j * im
    return out


def resolvent_oracle(taus=(0.1, 1.0, 10.0), tol: float = 1e-6, n_random: int = 20,
                     seed: int = 20240601, stride: int = 50) -> CheckResult:
    """Flat l = 0 solves against the exact kernel, and the energy bound at random tau."""
    pot = minkowski(0)
    errs = []
    for tau in taus:
        h = 0.01 if tau >= 5 else 0.05
        grid = pot.grid(h, 60.0)
        prof = lambda y: math.exp(-((y - 20.0) / 2.0) ** 2)
        g = np.exp(-((grid.x - 20.0) / 2.0) ** 2)
        sol = resolvent_apply(pot, tau, GriddedField(g, grid))
        xs = grid.x[::stride]
        ex = flat_green_apply(tau, prof, xs, (0.0, 60.0))
        errs.append(float(np.linalg.norm(sol.v[::stride] - ex) / np.linalg.norm(ex)))

    rng = np.random.default_rng(seed)
    re = rng.uniform(0.05, 5.0, n_random) * rng.choice([-1.0, 1.0], n_random)
    im = -rng.uniform(0.05, 2.0, n_random)
    sch = schwarzschild(0)
    grid = sch.grid(0.05, 200.0, -60.0)
    g = GriddedField(np.exp(-((grid.x - 20.0) / 2.0) ** 2), grid)
    sols = resolvent_apply_batch(sch, re + 1j * im, g)
    margins = []
    for s in sols:
        vn, bound = energy_bound(s)
        margins.append(vn / bound)
    ok = max(errs) < tol and max(margins) <= 1.0
    return CheckResult("resolvent_oracle", "flat kernel error and energy bound", ok,
                       {"rel_errors": errs, "worst_energy_ratio": max(margins),
                        "energy_points": n_random})


def radiation(taus=(0.25, 0.5, 1.0, 2.0), h: float = 0.1, x_max: float = 2.0 ** 13,
              factor: float = 2.0, last: int = 4) -> CheckResult:
    pot = schwarzschild(0)
    grid = pot.grid(h, x_max, -60.0)
    g = GriddedField(np.exp(-((grid.x - 20.0) / 2.0) ** 2), grid)
    sols = resolvent_apply_batch(pot, list(taus), g)
    checks = [radiation_check(s, last=last, factor=factor) for s in sols]
    worst = [float(np.min(c.ratios[-(last - 1):])) for c in checks]
    return CheckResult("radiation", "shell residual decay beyond the source",
                       all(c.passed for c in checks), {"min_ratio_last_shells": worst},
                       "\n".join(c.table() for c in checks))


def bound_control_potential() -> ModePotential:
    """Schwarzschild l = 0 plus a well deep enough to hold bound states."""
    pot = schwarzschild(0)

    def well(x):
        e = np.exp(-2.0 * np.abs(np.asarray(x, dtype=float) - 20.0))
        return -5.0 * 4.0 * e / (1.0 + e) ** 2          # -5 sech^2(x - 20)

    return pot.with_extra(well, "planted well")


def uniform_bound(n: int = 40, tau_range=(1e-3, 10.0), h: float = 0.01, x_max: float = 200.0,
                  max_variation: float = 10.0) -> CheckResult:
    """Ratio table over real tau on Schwarzschild, then the planted-well control."""
    taus = np.geomspace(tau_range[0], tau_range[1], n)
    pot = schwarzschild(0)
    grid = pot.grid(h, x_max, -60.0)
    g = GriddedField(np.exp(-((grid.x - 20.0) / 2.0) ** 2), grid)
    tab = le_tau_bound_monitor(pot, taus, g, probe=False, modulate=True)
    well = bound_control_potential()
    ctl = le_tau_bound_monitor(well, taus[::8], g, modulate=True)
    ok = tab.variation < max_variation and not len(tab.flagged) and len(ctl.flagged) > 0
    return CheckResult("uniform_bound", "resolvent ratio table and planted-well control", ok,
                       {"variation": tab.variation, "flagged": len(tab.flagged),
                        "control_bound_states": list(ctl.bound_states),
                        "control_flagged": len(ctl.flagged)},
                       tab.table() + ctl.table())


def flat_monopole_source(h: float = 0.01, x_max: float = 20.0) -> GriddedField:
    """Mode-field source -r f with f a unit-mass bump supported in r < 1."""
    pot = minkowski(0)
    grid = pot.grid(h, x_max)

    def bump(r):
        r = np.asarray(r, dtype=float)
        return np.where(r < 1, np.exp(1 - 1 / np.maximum(1 - r * r, 1e-300)), 0.0)

    mass = 4 * np.pi * quad(lambda r: float(bump(r)) * r * r, 0, 1)[0]
    return GriddedField(-grid.r * bump(grid.r) / mass, grid)


def zero_expansion(c_tol: float = 1e-4, max_drift: float = 0.01) -> CheckResult:
    flat = zero_resolvent(minkowski(0), flat_monopole_source())
    pot = schwarzschild(0)
    grid = pot.grid(0.05, 100.0, -60.0)
    sch = zero_resolvent(pot, GriddedField(np.exp(-((grid.x - 20.0) / 2.0) ** 2), grid))
    err = abs(flat.c - 1 / (4 * np.pi))
    return CheckResult("zero_expansion", "flat monopole coefficient and c-fit drift",
                       err <= c_tol and sch.c_drift < max_drift,
                       {"flat_c": flat.c, "flat_c_error": err, "schwarzschild_c": sch.c,
                        "schwarzschild_drift": sch.c_drift}, flat.table() + sch.table())


def low_frequency(sweep=None, first_min: float = 0.95, second_min: float = 1.7,
                  ells=(0, 1)) -> CheckResult:
    sweep = DEFAULT_SWEEP if sweep is None else np.asarray(sweep)
    s1, s2 = [], []
    tables = []
    for ell in ells:
        pot = schwarzschild(ell)
        grid = pot.grid(0.05, 100.0, -60.0)
        g = GriddedField(np.exp(-((grid.x - 20.0) / 2.0) ** 2), grid)
        lf = low_freq_expansion(pot, g, sweep, check=False)
        s1.append(lf.slope_first)
        s2.append(lf.slope_second)
        tables.append(lf.table())
    ok = min(s1) >= first_min and min(s2) >= second_min
    return CheckResult("low_frequency", "remainder slopes on the small-tau sweep", ok,
                       {"ells": list(ells), "first": s1, "second": s2}, "".join(tables))


CLOSURE_CASES = (("minkowski", 0), ("minkowski", 1), ("schwarzschild", 0), ("schwarzschild", 1))


def closure_case(kind: str, ell: int, t_max: float = 400.0, h: float = 0.05,
                 observer: float = 10.0) -> dict:
    """Synthesis against evolution on [0, t_max / 2] for one background."""
    pot = minkowski(ell) if kind == "minkowski" else schwarzschild(ell)
    window = t_max / 2
    cfg = EvolutionConfig(x_max=window + 60.0, t_final=window, h=h,
                          x_min=None if kind == "minkowski" else -window - 60.0,
                          observers=(observer,))
    data = gaussian_data(grid_for(pot, cfg), 20.0, 2.0)
    ev = evolve(pot, data, cfg)
    plan = plan_for(data, t_max, nt=int(round(t_max / 0.1)) + 1)
    syn = synthesize(pot, data, plan, [observer])
    keep = syn.times <= window + 1e-9
    ts, ys = syn.times[keep], syn.phi[keep, 0]
    ye = np.interp(ts, ev.times, ev.phi[:, 0])
    err = float(np.linalg.norm(ys - ye) / np.linalg.norm(ye))
    return {"case": f"{kind} l={ell}", "l2_rel": err, "nodes": len(plan.positive_nodes()),
            "imag_ratio": syn.imag_ratio}


def pipeline_closure(cases=CLOSURE_CASES, tol: float = 0.01, **kw) -> CheckResult:
    rows = [closure_case(k, l, **kw) for k, l in cases]
    errs = [r["l2_rel"] for r in rows]
    return CheckResult("pipeline_closure", "synthesis against evolution", max(errs) < tol,
                       {"cases": [r["case"] for r in rows], "l2_rel": errs})


def convergence(hs=(0.4, 0.2, 0.1, 0.05), t_final: float = 150.0,
                band=(3.5, 4.5)) -> CheckResult:
    """Self-convergence of the Schwarzschild l = 0 observer series."""
    pot = schwarzschild(0)

    def run(h):
        cfg = EvolutionConfig(x_max=t_final + 50.0, t_final=t_final, h=h, x_min=-150.0,
                              observers=(10.0,))
        return evolve(pot, gaussian_data(grid_for(pot, cfg), 20.0, 3.0), cfg).series(0)

    st = convergence_study(run, hs)
    return CheckResult("convergence", "observed order under grid halving",
                       band[0] <= st.order <= band[1],
                       {"order": st.order, "orders": list(st.orders)}, st.table())


# registry ------------------------------------------------------------------

CHECKS = ("price_tail", "derivative_tail", "cone_bound", "huygens", "resolvent_oracle",
          "radiation", "uniform_bound", "zero_expansion", "low_frequency",
          "pipeline_closure", "convergence")

_SIMPLE = {
    "huygens": huygens, "resolvent_oracle": resolvent_oracle, "radiation": radiation,
    "uniform_bound": uniform_bound, "zero_expansion": zero_expansion,
    "low_frequency": low_frequency, "pipeline_closure": pipeline_closure,
    "convergence": convergence,
}


def run_checks(keys=CHECKS, log: Callable[[str], None] | None = None) -> list[CheckResult]:
    """Run the named checks in registry order; the three tail checks share one run."""
    unknown = set(keys) - set(CHECKS)
    if unknown:
        raise ValueError(f"unknown checks: {sorted(unknown)}")
    out = []
    shared = None
    for key in CHECKS:
        if key not in keys:
            continue
        t0 = time.perf_counter()
        if key in ("price_tail", "derivative_tail", "cone_bound"):
            if shared is None:
                shared = price_run()
            res = {"price_tail": price_tail, "derivative_tail": derivative_tail,
                   "cone_bound": cone_bound}[key](shared)
        else:
            res = _SIMPLE[key]()
        res.wall_time = time.perf_counter() - t0
        out.append(res)
        if log:
            log(res.line())
    return out
