"""Compiled vs numpy evolution kernel: wall time per step and agreement.

    python3 benchmarks/bench_kernel.py [--sizes 2000,8000,32000] [--steps 2000]

Each run evolves Schwarzschild l = 0 mixed Gaussian data on a grid of the
given size with both backends and reports the best of ``--repeat`` runs.
"""

import argparse
import time

import numpy as np

from localdecay.evolve import EvolutionConfig, evolve, get_backend, initial_data
from localdecay.geometry import BackgroundMetric, mode_potential, normalize_coordinates


def setup(n, steps, h=0.1, cfl=0.5):
    pot = mode_potential(normalize_coordinates(BackgroundMetric.schwarzschild(1.0)), 0)
    x_min = -0.5 * n * h
    cfg = EvolutionConfig(x_max=x_min + (n - 1) * h, t_final=steps * cfl * h, h=h, x_min=x_min,
                          cfl=cfl, observers=(10.0,), clean=False)
    grid = pot.grid(h, cfg.x_max, x_min)
    data = initial_data(grid, lambda x: np.exp(-((x - 10.0) / 2.0) ** 2),
                        lambda x: -(x - 10.0) / 2.0 * np.exp(-((x - 10.0) / 2.0) ** 2), "mixed")
    return pot, data, cfg


def best(pot, data, cfg, backend, repeat):
    times, run = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        run = evolve(pot, data, cfg, backend=backend)
        times.append(time.perf_counter() - t0)
    return min(times), run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="2000,8000,32000")
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    try:
        get_backend("compiled")
    except ImportError:
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation`")
    print(f"{'points':>8} {'steps':>6} {'compiled s':>11} {'python s':>9} "
          f"{'speedup':>8} {'ns/pt/step':>11} {'max diff':>9}")
    for n in (int(s) for s in args.sizes.split(",")):
        pot, data, cfg = setup(n, args.steps)
        tc, rc = best(pot, data, cfg, "compiled", args.repeat)
        tp, rp = best(pot, data, cfg, "python", args.repeat)
        diff = float(np.max(np.abs(rc.phi - rp.phi)))
        per = 1e9 * tc / (n * rc.steps)
        print(f"{n:8d} {rc.steps:6d} {tc:11.3f} {tp:9.3f} {tp / tc:8.1f} {per:11.2f} {diff:9.1e}")


if __name__ == "__main__":
    main()
