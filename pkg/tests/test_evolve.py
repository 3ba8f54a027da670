import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from localdecay.errors import (CausalityViolation, CFLViolation, InsufficientDecade,
                               SignChange, SnapshotFormatError)
from localdecay.evolve import (EvolutionConfig, convergence_study, detect_tail_window, energy,
                               evolve, fit_decay, gaussian_data, get_backend, initial_data,
                               local_log_derivative, read_series, read_snapshots, write_series,
                               write_snapshots)
from localdecay.evolve.core import _left_mode, grid_for
from localdecay.geometry import BackgroundMetric, mode_potential, normalize_coordinates

try:
    get_backend("compiled")
    HAVE_COMPILED = True
except ImportError:
    HAVE_COMPILED = False


def flat(ell=0):
    return mode_potential(normalize_coordinates(BackgroundMetric.minkowski()), ell)


def schw(ell=0):
    return mode_potential(normalize_coordinates(BackgroundMetric.schwarzschild(1.0)), ell)


def gauss(x, c=20.0, w=2.0):
    return np.exp(-((np.asarray(x) - c) / w) ** 2)


def dalembert_half_line(t, x, c=20.0, w=2.0):
    """u_tt = u_xx on x > 0, u(t, 0) = 0, u(0) = g, u_t(0) = 0: odd extension of g."""
    F = lambda s: gauss(s, c, w) - gauss(-s, c, w)
    return 0.5 * (F(x - t) + F(x + t))


@pytest.mark.parametrize("backend", ["python", pytest.param("compiled", marks=pytest.mark.skipif(
    not HAVE_COMPILED, reason="extension not built"))])
def test_flat_l0_matches_dalembert(backend):
    pot = flat(0)
    cfg = EvolutionConfig(x_max=120.0, t_final=60.0, h=0.05, observers=(10.0, 30.0))
    data = initial_data(grid_for(pot, cfg), gauss, kind="static")
    run = evolve(pot, data, cfg, backend=backend)
    for i, xo in enumerate(run.observers):
        ex = dalembert_half_line(run.times, xo)
        assert np.max(np.abs(run.phi[:, i] - ex)) < 2e-6


@pytest.mark.skipif(not HAVE_COMPILED, reason="extension not built")
@pytest.mark.parametrize("boundary", ["outflow", "reflecting"])
def test_backends_agree(boundary):
    pot = schw(1)
    cfg = EvolutionConfig(x_max=150.0, t_final=80.0, h=0.1, x_min=-100.0, observers=(10.0,),
                          boundary=boundary, snapshot_every=20.0)
    data = gaussian_data(grid_for(pot, cfg))
    a = evolve(pot, data, cfg, backend="compiled")
    b = evolve(pot, data, cfg, backend="python")
    np.testing.assert_allclose(a.phi, b.phi, rtol=0, atol=1e-13)
    np.testing.assert_allclose(a.snapshots, b.snapshots, rtol=0, atol=1e-13)


def test_reflecting_energy_is_not_created():
    pot = flat(0)
    cfg = EvolutionConfig(x_max=60.0, t_final=200.0, h=0.1, observers=(10.0,),
                          boundary="reflecting", clean=False)
    grid = grid_for(pot, cfg)
    data = gaussian_data(grid, kind="mixed")
    run = evolve(pot, data, cfg)
    lm, parity = _left_mode(pot, grid, cfg.boundary)
    V = pot(grid.x)
    e0 = energy(data, V, lm, parity)
    e1 = energy(run.final, V, lm, parity)
    assert e1 <= e0 * (1 + 1e-12)
    assert e1 > 0.99 * e0


def test_outflow_energy_decreases():
    pot = schw(0)
    cfg = EvolutionConfig(x_max=60.0, t_final=150.0, h=0.1, x_min=-60.0, observers=(10.0,),
                          clean=False)
    grid = grid_for(pot, cfg)
    data = gaussian_data(grid, kind="outgoing")
    run = evolve(pot, data, cfg)
    lm, parity = _left_mode(pot, grid, cfg.boundary)
    V = pot(grid.x)
    assert energy(run.final, V, lm, parity) < 1e-3 * energy(data, V, lm, parity)


def test_config_errors():
    pot = flat(0)
    with pytest.raises(CausalityViolation):
        cfg = EvolutionConfig(x_max=50.0, t_final=60.0, h=0.1, observers=(10.0,))
        evolve(pot, gaussian_data(grid_for(pot, cfg)), cfg)
    with pytest.raises(CFLViolation):
        cfg = EvolutionConfig(x_max=100.0, t_final=10.0, h=0.1, cfl=0.95, observers=(10.0,))
        evolve(pot, gaussian_data(grid_for(pot, cfg)), cfg)
    with pytest.raises(ValueError):
        EvolutionConfig(x_max=100.0, t_final=10.0, boundary="periodic")


def test_convergence_order_of_synthetic_series():
    def run(h):
        t = np.arange(0, 10 + 1e-9, h / 2)
        return t, np.sin(t) + 3.0 * h ** 4 * np.cos(2 * t)

    st_ = convergence_study(run, (0.4, 0.2, 0.1, 0.05))
    assert st_.order == pytest.approx(4.0, abs=1e-9)
    with pytest.raises(ValueError):
        convergence_study(run, (0.4, 0.3, 0.1))


@settings(max_examples=30)
@given(st.floats(min_value=0.5, max_value=6.0), st.floats(min_value=0.1, max_value=1e3),
       st.sampled_from([-1.0, 1.0]))
def test_fit_recovers_power_law(p, A, sign):
    t = np.linspace(1.0, 3000.0, 20000)
    f = fit_decay(t, sign * A * t ** -p, (100.0, 2000.0))
    assert f.p == pytest.approx(p, abs=1e-9)
    assert f.A == pytest.approx(A, rel=1e-8)
    assert f.sign == sign
    assert f.drift < 1e-6


def test_fit_errors():
    t = np.linspace(1.0, 3000.0, 5000)
    with pytest.raises(InsufficientDecade):
        fit_decay(t, t ** -3.0, (200.0, 1000.0))
    with pytest.raises(SignChange):
        fit_decay(t, np.cos(t / 100.0) * t ** -3.0, (100.0, 2000.0))


def test_local_log_derivative_of_power_law():
    t = np.geomspace(10, 1000, 400)
    lld = local_log_derivative(t, 5.0 * t ** -3.0)
    np.testing.assert_allclose(lld[5:-5], -3.0, atol=1e-6)


def test_detect_window_skips_the_transient():
    t = np.linspace(0.1, 2000.0, 40000)
    y = np.exp(-t / 10.0) * np.cos(t) + 1e3 * (t + 20.0) ** -3.0
    lo, hi = detect_tail_window(t, y)
    assert 100.0 < lo < 600.0 and hi == t[-1]


def test_series_round_trip(tmp_path):
    t = np.linspace(0, 1, 11)
    cols = [np.sin(t), np.cos(t) * 1e-300]
    write_series(tmp_path / "s.txt", t, cols, ("a", "b"), "header line")
    t2, c2 = read_series(tmp_path / "s.txt")
    np.testing.assert_array_equal(t2, t)
    np.testing.assert_array_equal(c2, np.array(cols))
    assert (tmp_path / "s.txt").read_text().startswith("# header line\n# t a b\n")


@settings(max_examples=40)
@given(st.integers(1, 6), st.integers(1, 40), st.integers(0, 5), st.booleans(),
       st.floats(-100.0, 100.0), st.floats(0.01, 1.0))
def test_snapshot_round_trip(tmp_path_factory, nsnap, nx, ell, stag, x0, h):
    path = tmp_path_factory.mktemp("snap") / "s.bin"
    rng = np.random.default_rng(nsnap * 100 + nx)
    data = rng.normal(size=(nsnap, nx))
    times = np.arange(nsnap) * 0.5
    x = x0 + h * np.arange(nx)
    write_snapshots(path, times, x, data, ell=ell, mass=1.5, staggered=stag)
    snap = read_snapshots(path)
    np.testing.assert_array_equal(snap.data, data)
    np.testing.assert_array_equal(snap.times, times)
    assert (snap.ell, snap.mass, snap.staggered) == (ell, 1.5, stag)
    np.testing.assert_allclose(snap.x, x, atol=1e-12 * max(1.0, abs(x0)))
    assert path.stat().st_size == 64 + 8 * nsnap * (nx + 1)


def test_snapshot_layout_is_bit_exact(tmp_path):
    """Independent decode of the documented layout with struct only."""
    path = tmp_path / "s.bin"
    write_snapshots(path, [0.0, 2.5], [1.0, 1.25, 1.5], [[1, 2, 3], [4, 5, 6]], ell=2, mass=1.0,
                    staggered=True)
    raw = path.read_bytes()
    assert raw[:8] == b"LDSNAP01"
    assert struct.unpack_from("<I", raw, 8) == (1,)
    assert struct.unpack_from("<I", raw, 12) == (2,)
    assert struct.unpack_from("<QQ", raw, 16) == (3, 2)
    assert struct.unpack_from("<ddd", raw, 32) == (1.0, 0.25, 1.0)
    assert struct.unpack_from("<II", raw, 56) == (1, 0)
    assert struct.unpack_from("<8d", raw, 64) == (0.0, 1, 2, 3, 2.5, 4, 5, 6)
    assert len(raw) == 64 + 64


def test_snapshot_corruption_detected(tmp_path):
    path = tmp_path / "s.bin"
    write_snapshots(path, [0.0], [0.0, 1.0], [[1.0, 2.0]])
    raw = path.read_bytes()
    for bad in (raw[:40], b"XXXXXXXX" + raw[8:], raw[:8] + struct.pack("<I", 9) + raw[12:],
                raw + b"\0" * 8):
        path.write_bytes(bad)
        with pytest.raises(SnapshotFormatError):
            read_snapshots(path)


def test_evolution_writes_snapshots_on_schedule():
    pot = flat(1)
    cfg = EvolutionConfig(x_max=100.0, t_final=40.0, h=0.1, observers=(10.0,), snapshot_every=10.0)
    run = evolve(pot, gaussian_data(grid_for(pot, cfg)), cfg)
    np.testing.assert_allclose(run.snapshot_times, [0, 10, 20, 30, 40], atol=1e-9)
    assert run.snapshots.shape == (5, len(run.snapshot_x))
