"""Command line: ``localdecay <subcommand> ...``.

Exit status is 0 when a command succeeds and every check it makes passes,
1 when a check fails (including a campaign stage that raised), and 2 on
usage or runtime errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .campaign import (build_metric, compare_series, default_x_min, make_data,
                       profile_functions, rerun_manifest, run_campaign, series_name)
from .config import BackgroundSection, bundled, load
from .errors import LocalDecayError, StageError
from .evolve import (EvolutionConfig, detect_tail_window, evolve, fit_decay, read_series,
                     write_series, write_snapshots)
from .evolve.core import grid_for
from .geometry import mode_potential, normalization_report, normalize_coordinates
from .norms import GriddedField
from .resolvent import (DEFAULT_SWEEP, le_tau_bound_monitor, low_freq_expansion,
                        radiation_check, residual, resolvent_apply, zero_resolvent)
from .synthesis import plan_for, synthesize, tail_from_low_freq


class UsageError(Exception):
    pass


# argument helpers -------------------------------------------------------------

def floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def colon_floats(text: str, n: int | None = None) -> list[float]:
    parts = [float(v) for v in text.split(":")]
    if n is not None and len(parts) != n:
        raise argparse.ArgumentTypeError(f"expected {n} colon-separated numbers, got {text!r}")
    return parts


def profile_arg(text: str) -> tuple[str, float, float, float]:
    """``kind:center:width[:amplitude]`` with kind gaussian or bump."""
    parts = text.split(":")
    if len(parts) not in (3, 4) or parts[0] not in ("gaussian", "bump"):
        raise argparse.ArgumentTypeError(
            f"profile must look like gaussian:20:2 or bump:20:2[:amp], got {text!r}")
    amp = float(parts[3]) if len(parts) == 4 else 1.0
    return parts[0], float(parts[1]), float(parts[2]), amp


def _background_args(p: argparse.ArgumentParser, ell: bool = True) -> None:
    g = p.add_argument_group("background")
    g.add_argument("--config", help="TOML document whose [background] table is used")
    g.add_argument("--background", choices=("minkowski", "schwarzschild", "custom"))
    g.add_argument("--mass", type=float)
    g.add_argument("--R0", type=float, help="inner boundary radius (exterior domains)")
    g.add_argument("--r-match", type=float, help="radius where x(r) = r is imposed")
    g.add_argument("--domain", choices=("whole", "exterior"))
    g.add_argument("--coeff", action="append", default=[], metavar="NAME=PATH",
                   help="two-column coefficient file for a custom background (repeatable)")
    if ell:
        g.add_argument("--ell", type=int, default=0)


def _operator(args):
    b = load(args.config).background if args.config else BackgroundSection()
    kind = args.background or b.kind
    coeffs = dict(b.coefficients)
    for item in args.coeff:
        if "=" not in item:
            raise UsageError(f"--coeff needs NAME=PATH, got {item!r}")
        k, v = item.split("=", 1)
        coeffs[k] = v
    metric = build_metric(kind, args.mass if args.mass is not None else b.mass,
                          args.R0 if args.R0 is not None else b.R0,
                          args.domain or b.domain, coeffs)
    return normalize_coordinates(metric, args.r_match if args.r_match is not None else b.r_match)


def _pot(args):
    return mode_potential(_operator(args), args.ell)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _target(out: Path, name: str, overwrite: bool) -> Path:
    p = out / name
    if p.exists() and not overwrite:
        raise UsageError(f"{p} exists; pass --overwrite to replace it")
    return p


def _grid(pot, h, x_max, x_min):
    if x_min is None and pot.left == "horizon":
        x_min = -60.0 * max(pot.mass, 1.0)
    return pot.grid(h, x_max, x_min)


def _source(pot, args) -> GriddedField:
    grid = _grid(pot, args.h, args.x_max, args.x_min)
    kind, c, w, a = args.source
    f, _ = profile_functions(kind, c, w, a)
    return GriddedField(np.asarray(f(grid.x), dtype=float), grid)


# subcommands ------------------------------------------------------------------

def cmd_normalize(args) -> int:
    op = _operator(args)
    r = None
    if args.r_grid:
        lo, hi, n = args.r_grid
        r = np.geomspace(lo, hi, int(n))
    text = normalization_report(op, r)
    if args.out:
        p = Path(args.out)
        if p.exists() and not args.overwrite:
            raise UsageError(f"{p} exists; pass --overwrite to replace it")
        p.write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_evolve(args) -> int:
    pot = _pot(args)
    obs = args.observers
    x_max = args.x_max if args.x_max is not None else max(obs) + args.tfinal + 20.0
    x_min = args.x_min if args.x_min is not None else default_x_min(pot, args.tfinal)
    cfg = EvolutionConfig(x_max=x_max, t_final=args.tfinal, h=args.h, x_min=x_min, cfl=args.cfl,
                          observers=tuple(obs), boundary=args.boundary,
                          snapshot_every=args.snapshot_every, clean=not args.allow_reflections)
    grid = grid_for(pot, cfg)
    kind, c, w, a = args.data
    data = make_data(grid, kind, c, w, a, args.kind)
    out = _out_dir(args)
    targets = {}
    for xo in obs:
        targets[("phi", xo)] = _target(out, series_name("phi", xo), args.overwrite)
        targets[("dtphi", xo)] = _target(out, series_name("dtphi", xo), args.overwrite)
    snap = _target(out, "snapshots.bin", args.overwrite) if args.snapshot_every > 0 else None
    run = evolve(pot, data, cfg, backend=args.backend)
    head = f"{pot.label} h={cfg.h:g} dt={cfg.dt:.6g} backend={run.backend}"
    for i, xo in enumerate(run.observers):
        write_series(targets[("phi", xo)], run.times, [run.phi[:, i]], ("phi",),
                     head + f" x_obs={xo:g}")
        write_series(targets[("dtphi", xo)], run.times, [run.pi[:, i]], ("dtphi",),
                     head + f" x_obs={xo:g}")
    if snap is not None:
        write_snapshots(snap, run.snapshot_times, run.snapshot_x, run.snapshots, ell=pot.ell,
                        mass=pot.mass, staggered=grid.staggered)
    print(f"{run.steps} steps of dt = {cfg.dt:.6g} on {grid.n} points "
          f"({run.backend}, {run.wall_time:.1f} s); series in {out}")
    return 0


def cmd_resolve(args) -> int:
    pot = _pot(args)
    g = _source(pot, args)
    tau = complex(args.tau_re, args.tau_im)
    out = _out_dir(args)
    tag = f"{tau.real:g}{tau.imag:+g}i"
    prof_path = _target(out, f"profile_tau{tag}.txt", args.overwrite)
    rad_path = _target(out, f"radiation_tau{tag}.txt", args.overwrite)
    sol = resolvent_apply(pot, tau, g)
    grid = g.grid
    np.savetxt(prof_path, np.column_stack([grid.x, grid.r, sol.v.real, sol.v.imag]),
               fmt="%.17e", header=f"{pot.label} tau={tag}\nx r re_v im_v")
    res = residual(sol, pot)
    print(f"tau = {tau}  Wronskian drift = {sol.drift:.3e}  LE* residual = {res:.3e}  "
          f"seed radius = {sol.match_radius:g}")
    status = 0
    if tau.imag == 0:
        try:
            rc = radiation_check(sol, strict=False)
        except ValueError as exc:
            print(f"radiation check skipped: {exc}")
        else:
            rad_path.write_text(rc.table())
            print(f"radiation condition: {'passed' if rc.passed else 'FAILED'}")
            status = 0 if rc.passed else 1
    return status


def cmd_resolve_sweep(args) -> int:
    pot = _pot(args)
    g = _source(pot, args)
    lo, hi, n = args.tau_log
    taus = np.geomspace(lo, hi, int(n)) + 1j * args.tau_im
    out = _out_dir(args)
    path = _target(out, "bounds.txt", args.overwrite)
    tab = le_tau_bound_monitor(pot, taus, g, threshold=args.threshold, probe=args.probe,
                               modulate=not args.fixed_source)
    path.write_text(tab.table())
    print(f"ratio variation max/min = {tab.variation:.4g}, flagged = {len(tab.flagged)}, "
          f"bound states = {[round(k, 6) for k in tab.bound_states]}")
    return 0 if tab.ok else 1


def cmd_zero(args) -> int:
    pot = _pot(args)
    z = zero_resolvent(pot, _source(pot, args), r_far=args.r_far)
    out = _out_dir(args)
    _target(out, "zero_expansion.txt", args.overwrite).write_text(z.table())
    print(f"c = {z.c:.10g}  d = {z.d:.10g}  multipole = {z.multipole:.10g}  "
          f"c-fit drift = {z.c_drift:.3e}")
    return 0


def cmd_lowfreq(args) -> int:
    pot = _pot(args)
    if args.sweep:
        lo, hi, n = args.sweep
        sweep = np.geomspace(lo, hi, int(n))
    else:
        sweep = DEFAULT_SWEEP
    lf = low_freq_expansion(pot, _source(pot, args), sweep, check=False)
    tp = tail_from_low_freq(lf, args.tail_window, x_obs=args.observer)
    out = _out_dir(args)
    _target(out, "lowfreq.txt", args.overwrite).write_text(lf.table())
    ok = lf.slope_first >= args.first_min and lf.slope_second >= args.second_min
    print(f"remainder slopes: first {lf.slope_first:.4f}, second {lf.slope_second:.4f} "
          f"(log-augmented {lf.slope_second_log:.4f}) -> {'pass' if ok else 'FAIL'}")
    if tp.present:
        print(f"predicted tail at x = {args.observer:g}: t^-{tp.exponent:.3f} "
              f"(leading s^{tp.order} log s, amplitude {tp.amplitude:.6g})")
    else:
        print("no tail resolved from the log terms")
    return 0 if ok else 1


def cmd_synthesize(args) -> int:
    pot = _pot(args)
    obs = args.observers
    x_min = args.x_min if args.x_min is not None else default_x_min(pot, 0.0)
    grid = pot.grid(args.h, args.x_max, x_min)
    kind, c, w, a = args.data
    data = make_data(grid, kind, c, w, a, args.kind)
    plan = plan_for(data, args.tmax, nt=int(round(args.tmax / args.dt)) + 1, rel=args.rel)
    out = _out_dir(args)
    targets = [_target(out, series_name("phi", xo), args.overwrite) for xo in sorted(obs)]
    res = synthesize(pot, data, plan, obs)
    for i, xo in enumerate(res.observers):
        write_series(targets[i], res.times, [res.phi[:, i]], ("phi",),
                     f"{pot.label} synthesis tau_max={plan.tau_max:g} x_obs={xo:g}")
    print(f"{len(plan.positive_nodes())} frequency nodes up to tau = {plan.tau_max:.3g} "
          f"({res.wall_time:.1f} s); series in {out}")
    return 0


def cmd_compare(args) -> int:
    t1, c1 = read_series(args.reference)
    t2, c2 = read_series(args.other)
    r = compare_series(t1, c1[args.column - 1], t2, c2[args.column - 1], args.window)
    ok = r["l2_rel"] < args.tol
    print("# reference other t_start t_end samples l2_rel sup_rel")
    print(f"{args.reference} {args.other} {r['window'][0]:g} {r['window'][1]:g} "
          f"{r['samples']} {r['l2_rel']:.6e} {r['sup_rel']:.6e}")
    print(f"L2 difference {'below' if ok else 'ABOVE'} tolerance {args.tol:g}")
    return 0 if ok else 1


def cmd_fit(args) -> int:
    t, cols = read_series(args.series)
    y = cols[args.column - 1]
    window = args.window or detect_tail_window(t, y)
    f = fit_decay(t, y, window, min_decades=args.min_decades)
    print(f.summary())
    if args.expect is None:
        return 0
    ok = abs(f.p - args.expect) <= args.tol and (args.max_drift is None or f.drift < args.max_drift)
    print(f"expected {args.expect:g} +/- {args.tol:g}: {'pass' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_campaign(args) -> int:
    out = args.out
    if args.rerun:
        new, bad = rerun_manifest(args.rerun, out, overwrite=args.overwrite, log=print)
        if bad:
            print("checksum mismatches:\n  " + "\n  ".join(bad))
            return 1
        print(f"re-run reproduced all {len(new.outputs)} checksums")
        return 0
    if args.bundled:
        cfg = bundled(args.bundled)
    elif args.config:
        cfg = load(args.config)
    else:
        raise UsageError("campaign needs a config file, --bundled NAME or --rerun MANIFEST")
    out = out or f"runs/{cfg.campaign.name}"
    try:
        manifest, summary = run_campaign(cfg, out, overwrite=args.overwrite, log=print)
    except StageError as exc:
        print(f"campaign FAILED: {exc} (partial manifest in {out})")
        return 1
    print(f"manifest: {Path(out) / 'manifest.json'}  ({len(manifest.outputs)} outputs)")
    if manifest.passed is None:
        return 0
    print("campaign " + ("passed" if manifest.passed else "FAILED"))
    return 0 if manifest.passed else 1


# parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="localdecay", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("normalize", help="normalization report of a background")
    _background_args(s, ell=False)
    s.add_argument("--r-grid", type=lambda t: colon_floats(t, 3), metavar="LO:HI:N")
    s.add_argument("--out", help="write the report here instead of stdout")
    s.add_argument("--overwrite", action="store_true")
    s.set_defaults(func=cmd_normalize)

    s = sub.add_parser("evolve", help="time-domain evolution of one mode")
    _background_args(s)
    s.add_argument("--tfinal", type=float, required=True)
    s.add_argument("--observers", type=floats, default=[10.0], metavar="X1,X2,...")
    s.add_argument("--h", type=float, default=0.1)
    s.add_argument("--cfl", type=float, default=0.5)
    s.add_argument("--x-max", type=float)
    s.add_argument("--x-min", type=float)
    s.add_argument("--data", type=profile_arg, default=("gaussian", 20.0, 2.0, 1.0))
    s.add_argument("--kind", default="mixed",
                   choices=("static", "velocity", "mixed", "outgoing", "ingoing"))
    s.add_argument("--boundary", default="outflow", choices=("outflow", "reflecting"))
    s.add_argument("--snapshot-every", type=float, default=0.0)
    s.add_argument("--backend", choices=("compiled", "python"))
    s.add_argument("--allow-reflections", action="store_true",
                   help="skip the check that the outer boundary stays causally disconnected")
    s.add_argument("--out", default=".")
    s.add_argument("--overwrite", action="store_true")
    s.set_defaults(func=cmd_evolve)

    def resolvent_common(s, x_max=400.0, h=0.1):
        _background_args(s)
        s.add_argument("--source", type=profile_arg, default=("gaussian", 20.0, 2.0, 1.0))
        s.add_argument("--h", type=float, default=h)
        s.add_argument("--x-max", type=float, default=x_max)
        s.add_argument("--x-min", type=float)
        s.add_argument("--out", default=".")
        s.add_argument("--overwrite", action="store_true")

    s = sub.add_parser("resolve", help="apply the outgoing resolvent at one frequency")
    resolvent_common(s, x_max=2.0 ** 13)
    s.add_argument("--tau-re", type=float, required=True)
    s.add_argument("--tau-im", type=float, default=0.0)
    s.set_defaults(func=cmd_resolve)

    s = sub.add_parser("resolve-sweep", help="resolvent ratio table over a frequency sweep")
    resolvent_common(s, x_max=200.0, h=0.01)
    s.add_argument("--tau-log", type=lambda t: colon_floats(t, 3), default=[1e-3, 10.0, 40],
                   metavar="LO:HI:N")
    s.add_argument("--tau-im", type=float, default=0.0)
    s.add_argument("--threshold", type=float, default=10.0)
    s.add_argument("--probe", action="store_true", help="scan for bound states as well")
    s.add_argument("--fixed-source", action="store_true",
                   help="use the same source at every tau (no exp(-i tau x) modulation)")
    s.set_defaults(func=cmd_resolve_sweep)

    s = sub.add_parser("zero", help="zero-frequency resolvent and its far-field coefficients")
    resolvent_common(s, x_max=100.0, h=0.05)
    s.add_argument("--r-far", type=float, default=1e4)
    s.set_defaults(func=cmd_zero)

    s = sub.add_parser("lowfreq", help="small-tau expansion remainders and tail prediction")
    resolvent_common(s, x_max=100.0, h=0.05)
    s.add_argument("--sweep", type=lambda t: colon_floats(t, 3), metavar="LO:HI:N")
    s.add_argument("--observer", type=float, default=10.0)
    s.add_argument("--tail-window", type=lambda t: colon_floats(t, 2), default=[200.0, 2000.0])
    s.add_argument("--first-min", type=float, default=0.95)
    s.add_argument("--second-min", type=float, default=1.7)
    s.set_defaults(func=cmd_lowfreq)

    s = sub.add_parser("synthesize", help="time series by Fourier inversion of the resolvent")
    _background_args(s)
    s.add_argument("--tmax", type=float, required=True)
    s.add_argument("--observers", type=floats, default=[10.0])
    s.add_argument("--dt", type=float, default=0.1)
    s.add_argument("--h", type=float, default=0.05)
    s.add_argument("--x-max", type=float, default=100.0, help="extent of the data grid")
    s.add_argument("--x-min", type=float)
    s.add_argument("--data", type=profile_arg, default=("gaussian", 20.0, 2.0, 1.0))
    s.add_argument("--kind", default="mixed",
                   choices=("static", "velocity", "mixed", "outgoing", "ingoing"))
    s.add_argument("--rel", type=float, default=1e-6)
    s.add_argument("--out", default=".")
    s.add_argument("--overwrite", action="store_true")
    s.set_defaults(func=cmd_synthesize)

    s = sub.add_parser("compare", help="L2 / sup difference of two series files")
    s.add_argument("reference")
    s.add_argument("other")
    s.add_argument("--column", type=int, default=1)
    s.add_argument("--window", type=lambda t: colon_floats(t, 2))
    s.add_argument("--tol", type=float, default=0.01)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("fit", help="power-law decay fit of a series file")
    s.add_argument("series")
    s.add_argument("--column", type=int, default=1)
    s.add_argument("--window", type=lambda t: colon_floats(t, 2),
                   help="fit window T1:T2 (default: detected from the local log derivative)")
    s.add_argument("--min-decades", type=float, default=1.0)
    s.add_argument("--expect", type=float)
    s.add_argument("--tol", type=float, default=0.15)
    s.add_argument("--max-drift", type=float,
                   help="also require the LLD drift below this (default: not checked)")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("campaign", help="run a configured campaign")
    s.add_argument("config", nargs="?")
    s.add_argument("--bundled", metavar="NAME", help="use a configuration shipped with the package")
    s.add_argument("--rerun", metavar="MANIFEST", help="re-run a manifest and compare checksums")
    s.add_argument("--out")
    s.add_argument("--overwrite", action="store_true",
                   help="replace an existing run directory")
    s.set_defaults(func=cmd_campaign)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args))
    except (UsageError, LocalDecayError, ValueError, FileExistsError, FileNotFoundError,
            ImportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
