"""Campaign driver: runs pipeline stages from a :class:`~localdecay.config.Config`.

A run directory holds one subdirectory per stage, ``summary.toml`` with the
measured quantities and pass/fail flags, and ``manifest.json`` listing every
output with its SHA-256. Stage instances (one per l) may run on a bounded
thread pool; file registration and manifest writing are serialized.
"""

from __future__ import annotations

import hashlib
import json
import math
import platform
import shutil
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import tomli_w

from . import __version__
from .config import STAGES, Config, from_dict, to_dict
from .errors import ConfigError, StageError
from .evolve import (EvolutionConfig, evolve, fit_decay, initial_data, write_series,
                     write_snapshots)
from .evolve._backend import get_backend
from .evolve.core import bump_profile, gaussian_profile, grid_for
from .geometry import (BackgroundMetric, CanonicalOperator, ModePotential, RadialGrid,
                       mode_potential, normalization_report, normalize_coordinates)
from .norms import GriddedField
from .resolvent import (le_tau_bound_monitor, low_freq_expansion, radiation_check, residual,
                        resolvent_apply_batch, zero_resolvent)
from .synthesis import plan_for, synthesize, tail_from_low_freq

MANIFEST = "manifest.json"
SUMMARY = "summary.toml"
PER_MODE = ("evolve", "resolve", "zero", "lowfreq", "synthesize", "compare", "fit")


# building blocks shared with the command line -------------------------------

def build_metric(kind: str, mass: float = 1.0, R0: float | None = None, domain: str = "whole",
                 coefficients: dict | None = None) -> BackgroundMetric:
    if kind == "minkowski":
        return BackgroundMetric.minkowski()
    if kind == "schwarzschild":
        return BackgroundMetric.schwarzschild(mass, R0=R0)
    if not coefficients:
        raise ConfigError("background.coefficients", "custom background needs coefficient files")
    return BackgroundMetric.from_files(coefficients, domain_kind=domain, R0=R0,
                                       mass=mass if domain == "exterior" else 0.0)


def build_operator(cfg: Config) -> CanonicalOperator:
    b = cfg.background
    metric = build_metric(b.kind, b.mass, b.R0, b.domain, b.coefficients)
    return normalize_coordinates(metric, b.r_match)


def profile_functions(profile: str, center: float, width: float, amplitude: float = 1.0):
    """(f, f') for a Gaussian of the given width or a bump of that half-width."""
    if profile == "gaussian":
        def f(x):
            return gaussian_profile(x, center, width, amplitude)

        def df(x):
            return -2.0 * (np.asarray(x) - center) / width ** 2 * f(x)
    elif profile == "bump":
        def f(x):
            return bump_profile(x, center, width, amplitude)

        def df(x):
            s = (np.asarray(x, dtype=float) - center) / width
            inside = np.abs(s) < 1.0
            out = np.zeros_like(s)
            out[inside] = -2.0 * s[inside] / (1.0 - s[inside] ** 2) ** 2 / width
            return out * f(x)
    else:
        raise ValueError(f"unknown profile {profile!r}")
    return f, df


def make_data(grid: RadialGrid, profile: str = "gaussian", center: float = 20.0,
              width: float = 2.0, amplitude: float = 1.0, kind: str = "mixed"):
    f, df = profile_functions(profile, center, width, amplitude)
    return initial_data(grid, f, df, kind)


def default_x_min(pot: ModePotential, span: float) -> float | None:
    """Left edge for a horizon end: far enough that nothing returns within ``span``."""
    return -(span + 60.0) if pot.left == "horizon" else None


def series_name(kind: str, x: float) -> str:
    return f"{kind}_x{x:g}.txt"


def _evolution_config(cfg: Config, pot: ModePotential) -> EvolutionConfig:
    e = cfg.evolve
    x_min = e.x_min if e.x_min is not None else default_x_min(pot, e.t_final)
    return EvolutionConfig(x_max=e.x_max, t_final=e.t_final, h=e.h, x_min=x_min, cfl=e.cfl,
                           observers=tuple(e.observers), boundary=e.boundary,
                           snapshot_every=e.snapshot_every)


def _data_for(cfg: Config, grid: RadialGrid):
    d = cfg.data
    return make_data(grid, d.profile, d.center, d.width, d.amplitude, d.kind)


def _source_for(cfg: Config, grid: RadialGrid) -> GriddedField:
    d = cfg.data
    f, _ = profile_functions(d.profile, d.center, d.width, d.amplitude)
    return GriddedField(np.asarray(f(grid.x), dtype=float), grid)


# manifest ---------------------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    name: str
    config_hash: str
    background: dict
    parameters: dict
    outputs: list = field(default_factory=list)      # {"path", "sha256", "bytes"}
    code_version: dict = field(default_factory=dict)
    wall_time: dict = field(default_factory=dict)    # stage -> seconds, plus "total"
    steps: dict = field(default_factory=dict)        # evolution step counts
    stages: list = field(default_factory=list)
    passed: bool | None = None
    failed_stage: str | None = None

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))

    def checksums(self) -> dict:
        return {o["path"]: o["sha256"] for o in self.outputs}


def code_version() -> dict:
    _, backend = get_backend()
    return {"localdecay": __version__, "numpy": np.__version__, "python": platform.python_version(),
            "evolve_backend": backend}


# context ----------------------------------------------------------------------

class _Context:
    def __init__(self, cfg: Config, root: Path, log):
        self.cfg = cfg
        self.root = root
        self.log = log or (lambda msg: None)
        self.files: set[str] = set()
        self.steps: dict = {}
        self.cache: dict = {}
        self.lock = threading.Lock()
        self.op = build_operator(cfg)

    def pot(self, ell: int) -> ModePotential:
        return mode_potential(self.op, ell)

    def path(self, rel: str) -> Path:
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        with self.lock:
            self.files.add(rel)
        return p

    def write_text(self, rel: str, text: str) -> None:
        self.path(rel).write_text(text)


# stages -------------------------------------------------------------------------

def _stage_normalize(ctx: _Context) -> dict:
    op = ctx.op
    ctx.write_text("normalize/report.txt", normalization_report(op))
    r = np.geomspace(max(op.r_match, 1.0), 1e4, 25)
    a, b = op.hrrtt_residuals(r)
    return {"r_match": op.r_match, "max_residual": float(max(np.max(a), np.max(b)))}


def _stage_evolve(ctx: _Context, ell: int) -> dict:
    pot = ctx.pot(ell)
    ecfg = _evolution_config(ctx.cfg, pot)
    grid = grid_for(pot, ecfg)
    data = _data_for(ctx.cfg, grid)
    backend = None if ctx.cfg.evolve.backend == "auto" else ctx.cfg.evolve.backend
    run = evolve(pot, data, ecfg, backend=backend)
    head = f"{pot.label} h={ecfg.h:g} dt={ecfg.dt:.6g} backend={run.backend}"
    for i, xo in enumerate(run.observers):
        write_series(ctx.path(f"evolve/l{ell}/{series_name('phi', xo)}"), run.times,
                     [run.phi[:, i]], ("phi",), head + f" x_obs={xo:g}")
        write_series(ctx.path(f"evolve/l{ell}/{series_name('dtphi', xo)}"), run.times,
                     [run.pi[:, i]], ("dtphi",), head + f" x_obs={xo:g}")
    if len(run.snapshot_times):
        write_snapshots(ctx.path(f"evolve/l{ell}/snapshots.bin"), run.snapshot_times,
                        run.snapshot_x, run.snapshots, ell=ell, mass=pot.mass,
                        staggered=grid.staggered)
    with ctx.lock:
        ctx.steps[f"evolve/l{ell}"] = run.steps
        ctx.cache[("evolve", ell)] = run
    return {"steps": run.steps, "dt": ecfg.dt, "grid_points": grid.n}


def _stage_resolve(ctx: _Context, ell: int) -> dict:
    r = ctx.cfg.resolve
    pot = ctx.pot(ell)
    x_min = r.x_min if r.x_min is not None else (-60.0 * max(pot.mass, 1.0)
                                                 if pot.left == "horizon" else None)
    grid = pot.grid(r.h, r.x_max, x_min)
    g = _source_for(ctx.cfg, grid)
    taus = [complex(t, r.tau_im) for t in r.taus]
    sols = resolvent_apply_batch(pot, taus, g)
    out = {"taus": list(r.taus), "tau_im": r.tau_im, "residuals": [], "radiation_passed": []}
    for s in sols:
        tag = f"{s.tau.real:g}{s.tau.imag:+g}i"
        rows = np.column_stack([grid.x, grid.r, s.v.real, s.v.imag])
        np.savetxt(ctx.path(f"resolve/l{ell}/profile_tau{tag}.txt"), rows, fmt="%.17e",
                   header=f"{pot.label} tau={tag}\nx r re_v im_v")
        out["residuals"].append(residual(s, pot))
        if r.tau_im == 0:
            rc = radiation_check(s, strict=False)
            out["radiation_passed"].append(rc.passed)
            ctx.write_text(f"resolve/l{ell}/radiation_tau{tag}.txt", rc.table())
    lo, hi, n = r.sweep
    sweep = np.geomspace(lo, hi, int(n))
    sgrid = pot.grid(r.sweep_h, r.sweep_x_max, x_min)
    tab = le_tau_bound_monitor(pot, sweep, _source_for(ctx.cfg, sgrid), threshold=r.threshold,
                               probe=r.probe, modulate=True)
    ctx.write_text(f"resolve/l{ell}/bounds.txt", tab.table())
    out.update(variation=tab.variation, flagged=len(tab.flagged),
               bound_states=list(tab.bound_states))
    out["passed"] = bool(all(out["radiation_passed"]) and tab.ok
                         and tab.variation < r.max_variation)
    return out


def _stage_zero(ctx: _Context, ell: int) -> dict:
    z = ctx.cfg.zero
    pot = ctx.pot(ell)
    grid = pot.grid(z.h, z.x_max, -60.0 * max(pot.mass, 1.0) if pot.left == "horizon" else None)
    res = zero_resolvent(pot, _source_for(ctx.cfg, grid), r_far=z.r_far)
    prof = np.column_stack([res.far_r, res.c_profile])
    np.savetxt(ctx.path(f"zero/l{ell}/c_profile.txt"), prof, fmt="%.17e", header="r c(r)")
    ctx.write_text(f"zero/l{ell}/expansion.txt", res.table())
    return {"c": res.c, "d": res.d, "multipole": res.multipole, "c_drift": res.c_drift,
            "c_from_moments": res.c_from_moments, "passed": bool(res.c_drift < z.max_drift)}


def _stage_lowfreq(ctx: _Context, ell: int) -> dict:
    lf_cfg = ctx.cfg.lowfreq
    pot = ctx.pot(ell)
    grid = pot.grid(lf_cfg.h, lf_cfg.x_max,
                    -60.0 * max(pot.mass, 1.0) if pot.left == "horizon" else None)
    lo, hi, n = lf_cfg.sweep
    lf = low_freq_expansion(pot, _source_for(ctx.cfg, grid), np.geomspace(lo, hi, int(n)),
                            check=False)
    ctx.write_text(f"lowfreq/l{ell}/remainders.txt", lf.table())
    tp = tail_from_low_freq(lf, lf_cfg.tail_window, x_obs=lf_cfg.observer)
    lines = [f"# predicted tail at x = {lf_cfg.observer:g} from the s^k log s terms",
             f"present = {tp.present}", f"order = {tp.order}",
             f"exponent = {tp.exponent:.6f}", f"amplitude = {tp.amplitude:.10e}",
             "# k b_k significance"]
    lines += [f"{k} {b:.10e} {z:.3g}" for k, (b, z) in
              enumerate(zip(tp.log_coefficients, tp.significance)) if k]
    ctx.write_text(f"lowfreq/l{ell}/tail.txt", "\n".join(lines) + "\n")
    ok = lf.slope_first >= lf_cfg.first_min and lf.slope_second >= lf_cfg.second_min
    return {"slope_first": lf.slope_first, "slope_second": lf.slope_second,
            "slope_second_log": lf.slope_second_log, "tail_present": tp.present,
            "tail_exponent": tp.exponent, "passed": bool(ok)}


def _stage_synthesize(ctx: _Context, ell: int) -> dict:
    s = ctx.cfg.synthesis
    pot = ctx.pot(ell)
    grid = grid_for(pot, _evolution_config(ctx.cfg, pot))
    data = _data_for(ctx.cfg, grid)
    plan = plan_for(data, s.t_max, nt=int(round(s.t_max / s.dt)) + 1, rel=s.rel)
    res = synthesize(pot, data, plan, s.observers)
    for i, xo in enumerate(res.observers):
        write_series(ctx.path(f"synthesize/l{ell}/{series_name('phi', xo)}"), res.times,
                     [res.phi[:, i]], ("phi",),
                     f"{pot.label} synthesis tau_max={plan.tau_max:g} x_obs={xo:g}")
    with ctx.lock:
        ctx.cache[("synthesize", ell)] = res
    return {"nodes": len(plan.positive_nodes()), "tau_max": plan.tau_max,
            "imag_ratio": res.imag_ratio}


def compare_series(t1, y1, t2, y2, window=None) -> dict:
    """L2 and sup differences of y2 against y1 on the samples of y1 in ``window``."""
    t1, y1 = np.asarray(t1), np.asarray(y1)
    lo = max(t1[0], t2[0])
    hi = min(t1[-1], t2[-1])
    if window is not None:
        lo, hi = max(lo, window[0]), min(hi, window[1])
    m = (t1 >= lo - 1e-9) & (t1 <= hi + 1e-9)
    a = y1[m]
    b = np.interp(t1[m], t2, y2)
    ref = float(np.linalg.norm(a))
    d = float(np.linalg.norm(b - a))
    sup_ref = float(np.max(np.abs(a))) if len(a) else 0.0
    return {"window": [float(lo), float(hi)], "samples": int(m.sum()),
            "l2_rel": d / ref if ref > 0 else d,
            "sup_rel": float(np.max(np.abs(b - a))) / sup_ref if sup_ref > 0 else 0.0}


def _stage_compare(ctx: _Context, ell: int) -> dict:
    ev = ctx.cache.get(("evolve", ell))
    syn = ctx.cache.get(("synthesize", ell))
    if ev is None or syn is None:
        raise ValueError("compare needs the evolve and synthesize stages in the same campaign")
    c = ctx.cfg.compare
    window = c.window or [0.0, ctx.cfg.synthesis.t_max / 2]
    rows, worst = [], 0.0
    for i, xo in enumerate(syn.observers):
        j = np.flatnonzero(np.isclose(ev.observers, xo))
        if not len(j):
            continue
        r = compare_series(syn.times, syn.phi[:, i], ev.times, ev.phi[:, j[0]], window)
        rows.append(f"{xo:g} {r['window'][0]:g} {r['window'][1]:g} {r['l2_rel']:.6e} "
                    f"{r['sup_rel']:.6e}")
        worst = max(worst, r["l2_rel"])
    if not rows:
        raise ValueError("no observer common to evolve and synthesize")
    ctx.write_text(f"compare/l{ell}/report.txt",
                   "# x_obs t_start t_end l2_rel sup_rel\n" + "\n".join(rows) + "\n")
    return {"l2_rel": worst, "passed": bool(worst < c.tolerance)}


def _stage_fit(ctx: _Context, ell: int) -> dict:
    ev = ctx.cache.get(("evolve", ell))
    if ev is None:
        raise ValueError("fit needs the evolve stage in the same campaign")
    f = ctx.cfg.fit
    rows, out, ok = [], {}, True
    for i, xo in enumerate(ev.observers):
        for which, expect, tol in (("phi", f.expect_phi, f.tol_phi),
                                   ("pi", f.expect_dt, f.tol_dt)):
            fit = fit_decay(ev.times, ev.phi[:, i] if which == "phi" else ev.pi[:, i], f.window)
            name = "phi" if which == "phi" else "dtphi"
            rows.append(f"{name} {xo:g} {fit.p:.6f} {fit.A:.6e} {fit.drift:.4f} {fit.r2:.8f}")
            out[f"p_{name}_x{xo:g}"] = fit.p
            if expect is not None:
                ok &= abs(fit.p - expect) <= tol
                if which == "phi":
                    ok &= fit.drift < f.max_drift
    ctx.write_text(f"fit/l{ell}/fits.txt", "# series x_obs p A lld_drift r2\n"
                   + "\n".join(rows) + "\n")
    if f.expect_phi is not None or f.expect_dt is not None:
        out["passed"] = bool(ok)
    return out


def _stage_acceptance(ctx: _Context) -> dict:
    from .acceptance import CHECKS, run_checks
    keys = ctx.cfg.acceptance.checks or list(CHECKS)
    results = run_checks(keys, log=ctx.log)
    ctx.write_text("acceptance/report.txt", "\n".join(r.line() for r in results) + "\n")
    for r in results:
        if r.detail:
            ctx.write_text(f"acceptance/{r.key}.txt", r.detail.rstrip("\n") + "\n")
    out = {r.key: bool(r.passed) for r in results}
    out["passed"] = all(out.values())
    return out


_SINGLE = {"normalize": _stage_normalize, "acceptance": _stage_acceptance}
_PER_MODE = {"evolve": _stage_evolve, "resolve": _stage_resolve, "zero": _stage_zero,
             "lowfreq": _stage_lowfreq, "synthesize": _stage_synthesize,
             "compare": _stage_compare, "fit": _stage_fit}


# driver -------------------------------------------------------------------------

def _plain(v):
    """Summary values as TOML-friendly scalars and lists."""
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items() if x is not None}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    return str(v)


def prepare_run_dir(out_dir, overwrite: bool = False) -> Path:
    """Create ``out_dir``; an existing non-empty directory needs ``overwrite``.

    Only a previous run directory (one holding a manifest) is ever cleared.
    """
    root = Path(out_dir)
    if root.exists() and any(root.iterdir()):
        if not overwrite:
            raise FileExistsError(f"{root} exists and is not empty; pass overwrite (--overwrite) to replace it")
        if not (root / MANIFEST).exists():
            raise FileExistsError(f"{root} is not a run directory (no {MANIFEST}); refusing to clear it")
        shutil.rmtree(root)
    root.mkdir(parents=True, exist_ok=True)
    return root


def run_campaign(cfg: Config, out_dir, overwrite: bool = False, log=None
                 ) -> tuple[RunManifest, dict]:
    """Run the configured stages in pipeline order; returns (manifest, summary).

    Raises StageError naming the failing stage; the manifest of the partial
    run is written first.
    """
    root = prepare_run_dir(out_dir, overwrite)
    t_start = time.perf_counter()
    stages = [s for s in STAGES if s in cfg.campaign.stages]
    manifest = RunManifest(name=cfg.campaign.name, config_hash=cfg.hash(),
                           background=to_dict(cfg)["background"], parameters=to_dict(cfg),
                           code_version=code_version(), stages=stages)
    summary: dict = {"campaign": {"name": cfg.campaign.name, "config_hash": manifest.config_hash}}
    ctx = _Context(cfg, root, log) if stages else None
    failure = None
    for stage in stages:
        t0 = time.perf_counter()
        try:
            if stage in _SINGLE:
                summary[stage] = _SINGLE[stage](ctx)
            else:
                fn = _PER_MODE[stage]
                ells = list(cfg.campaign.ell)
                if cfg.campaign.workers > 1 and len(ells) > 1:
                    with ThreadPoolExecutor(max_workers=cfg.campaign.workers) as pool:
                        res = list(pool.map(lambda l: fn(ctx, l), ells))
                else:
                    res = [fn(ctx, l) for l in ells]
                summary[stage] = {f"l{l}": r for l, r in zip(ells, res)}
        except Exception as exc:      # noqa: BLE001 - re-raised with the stage name
            failure = StageError(stage, exc)
            manifest.failed_stage = stage
        manifest.wall_time[stage] = time.perf_counter() - t0
        if ctx:
            ctx.log(f"stage {stage}: {'failed' if failure else 'done'} "
                    f"({manifest.wall_time[stage]:.1f} s)")
        if failure:
            break

    flags = _collect_flags(summary)
    manifest.passed = (all(flags) if flags else None) if failure is None else False
    if stages:
        summary["campaign"]["passed"] = bool(manifest.passed) if manifest.passed is not None else True
        (root / SUMMARY).write_text(tomli_w.dumps(_plain(summary)))
        ctx.files.add(SUMMARY)
        manifest.steps = dict(sorted(ctx.steps.items()))
        for rel in sorted(ctx.files):
            p = root / rel
            manifest.outputs.append({"path": rel, "sha256": sha256_file(p),
                                     "bytes": p.stat().st_size})
    manifest.wall_time["total"] = time.perf_counter() - t_start
    manifest.write(root / MANIFEST)
    if failure:
        raise failure
    return manifest, summary


def _collect_flags(summary: dict) -> list[bool]:
    out = []
    for key, val in summary.items():
        if key == "campaign" or not isinstance(val, dict):
            continue
        if "passed" in val:
            out.append(bool(val["passed"]))
        for sub in val.values():
            if isinstance(sub, dict) and "passed" in sub:
                out.append(bool(sub["passed"]))
    return out


def rerun_manifest(manifest_path, out_dir, overwrite: bool = False, log=None
                   ) -> tuple[RunManifest, list[str]]:
    """Re-run the configuration stored in a manifest and list checksum mismatches."""
    old = RunManifest.read(manifest_path)
    cfg = from_dict(old.parameters)
    new, _ = run_campaign(cfg, out_dir, overwrite=overwrite, log=log)
    a, b = old.checksums(), new.checksums()
    bad = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
    return new, bad
