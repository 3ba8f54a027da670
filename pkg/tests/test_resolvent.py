import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad, solve_ivp

from localdecay.evolve import bump_profile
from localdecay.geometry import (BackgroundMetric, ModePotential, mode_potential,
                                 normalize_coordinates)
from localdecay.norms import GriddedField
from localdecay.resolvent import (DEFAULT_SWEEP, bound_state_probe, energy_bound,
                                  jost_solutions, le_tau_bound_monitor, low_freq_expansion,
                                  radiation_check, residual, resolvent_apply,
                                  resolvent_apply_batch, spectral_point, zero_resolvent)
from localdecay.synthesis import tail_from_low_freq


def flat(ell=0):
    return mode_potential(normalize_coordinates(BackgroundMetric.minkowski()), ell)


def schw(ell=0):
    return mode_potential(normalize_coordinates(BackgroundMetric.schwarzschild(1.0)), ell)


def line_potential(V, label):
    """Regular-centre l = 0 problem with an arbitrary potential of x."""
    return ModePotential(ell=0, V=V, r_of_x=lambda x: np.asarray(x, float),
                         drdx=lambda x: np.ones_like(np.asarray(x, float)), x_min=0.0,
                         x_max=np.inf, left="regular", label=label)


def brute_outgoing(V, tau, xs, X=1e5):
    """Integrate f'' - 2 i tau f' - V f = 0 inward from f(X) = 1, f'(X) = 0.

    For V ~ x^-3 the seed error at X is O(1/X^2), far below the tolerance.
    """
    def rhs(x, y):
        return [y[1], 2j * tau * y[1] + V(x) * y[0]]

    xs = np.sort(np.asarray(xs, float))[::-1]
    sol = solve_ivp(rhs, (X, xs[-1]), [1.0 + 0j, 0j], method="DOP853", t_eval=xs,
                    rtol=1e-12, atol=1e-15)
    return xs, np.exp(-1j * tau * xs) * sol.y[0]


@pytest.mark.parametrize("tau", [0.3, 1.0, 2.0 - 0.5j])
def test_jost_cubic_tail_against_brute_force(tau):
    """A potential with no 1/x^2 term and a 1/x^3 tail."""
    V = lambda x: 3.0 / (np.asarray(x) ** 2 + 1.0) ** 1.5
    pot = line_potential(V, "cubic tail")
    xs, ex = brute_outgoing(V, tau, [1.0, 5.0, 20.0, 60.0])
    jd = jost_solutions(pot, tau, xs[::-1])
    np.testing.assert_allclose(jd.psi_out, ex[::-1], rtol=1e-8)
    assert jd.drift < 1e-8


@pytest.mark.parametrize("tau", [0.2, 1.5, 1.0 - 0.3j])
def test_jost_flat_l1_closed_form(tau):
    """Outgoing l = 1 solution exp(-i tau x) (1 - i / (tau x))."""
    xs = np.array([0.5, 2.0, 10.0, 50.0])
    jd = jost_solutions(flat(1), tau, xs)
    ex = np.exp(-1j * tau * xs) * (1 - 1j / (tau * xs))
    np.testing.assert_allclose(jd.psi_out, ex, rtol=1e-9)


def test_spectral_point_rejects_upper_half_plane():
    with pytest.raises(ValueError):
        spectral_point(1.0 + 0.1j)


def flat_green(tau, g, x, support):
    """v(x) = int G(x, y) g(y) dy, G = -sin(tau min) exp(-i tau max) / tau.

    G is psi_in(min) psi_out(max) / W with psi_in = sin(tau x),
    psi_out = exp(-i tau x) and W = psi_in psi_out' - psi_out psi_in' = -tau.
    """
    a, b = support
    out = []
    for xx in x:
        def k(y, part):
            v = -np.sin(tau * min(xx, y)) * np.exp(-1j * tau * max(xx, y)) / tau * g(y)
            return v.real if part == 0 else v.imag
        pts = [xx] if a < xx < b else None
        out.append(quad(k, a, b, args=(0,), points=pts, limit=300)[0]
                   + 1j * quad(k, a, b, args=(1,), points=pts, limit=300)[0])
    return np.array(out)


@pytest.mark.parametrize("tau", [0.7, 0.7 - 0.3j, 3.0])
def test_flat_resolvent_against_kernel(tau):
    pot = flat(0)
    grid = pot.grid(0.02, 50.0)
    prof = lambda y: math.exp(-((y - 15.0) / 2.0) ** 2)
    g = GriddedField(np.exp(-((grid.x - 15.0) / 2.0) ** 2), grid)
    sol = resolvent_apply(pot, tau, g)
    idx = np.arange(0, grid.n, 97)
    ex = flat_green(tau, prof, grid.x[idx], (0.0, 50.0))
    assert np.linalg.norm(sol.v[idx] - ex) / np.linalg.norm(ex) < 1e-7
    assert residual(sol, pot) < 1e-4


def test_batch_equals_single():
    pot = schw(1)
    grid = pot.grid(0.1, 100.0, -60.0)
    g = GriddedField(np.exp(-((grid.x - 20.0) / 2.0) ** 2), grid)
    taus = [0.3, 1.1 - 0.2j]
    batch = resolvent_apply_batch(pot, taus, g)
    # the batch shares adaptive steps across frequencies, so agreement is at
    # the integration tolerance rather than bitwise
    for t, b in zip(taus, batch):
        single = resolvent_apply(pot, t, g).v
        assert np.max(np.abs(single - b.v)) < 1e-7 * np.max(np.abs(single))


@settings(max_examples=8)
@given(st.floats(0.1, 4.0), st.floats(0.05, 2.0), st.sampled_from([-1.0, 1.0]))
def test_energy_inequality(re, im, sign):
    pot = schw(0)
    grid = pot.grid(0.1, 150.0, -60.0)
    g = GriddedField(np.exp(-((grid.x - 10.0) / 3.0) ** 2), grid)
    vn, bound = energy_bound(resolvent_apply(pot, complex(sign * re, -im), g))
    assert vn <= bound


def test_radiation_condition_on_flat_space():
    pot = flat(1)
    grid = pot.grid(0.1, 2.0 ** 12)
    g = GriddedField(bump_profile(grid.x, 10.0, 3.0), grid)
    rc = radiation_check(resolvent_apply(pot, 0.8, g))
    assert rc.passed
    assert np.all(rc.ratios[-3:] > 3.0)


def poschl_teller_kappas(depth):
    lam = 0.5 * (-1.0 + math.sqrt(1.0 + 4.0 * depth))
    return [lam - n for n in range(int(math.ceil(lam))) if lam - n > 0]


def test_bound_states_of_planted_well():
    """-D sech^2(x - 20) far from the centre has kappa = lam - n, lam (lam + 1) = D."""
    well = line_potential(lambda x: -5.0 / np.cosh(np.asarray(x) - 20.0) ** 2, "well")
    got = bound_state_probe(well)
    np.testing.assert_allclose(got, poschl_teller_kappas(5.0), atol=1e-6)
    assert bound_state_probe(flat(0)) == []


def test_monitor_flags_only_the_well():
    taus = np.geomspace(1e-2, 3.0, 5)
    pot = flat(0)
    grid = pot.grid(0.02, 80.0)
    g = GriddedField(np.exp(-((grid.x - 20.0) / 2.0) ** 2), grid)
    clean = le_tau_bound_monitor(pot, taus, g, modulate=True)
    assert clean.ok and clean.variation < 10.0 and not len(clean.flagged)
    well = pot.with_extra(lambda x: -5.0 / np.cosh(np.asarray(x) - 20.0) ** 2, "well")
    bad = le_tau_bound_monitor(well, taus[::2], g, modulate=True)
    assert len(bad.flagged) >= 2 and len(bad.bound_states) == 2


def test_zero_resolvent_flat_coefficient():
    """At tau = 0 the kernel tends to -min(x, y), so far out v = -int y g(y) dy."""
    pot = flat(0)
    grid = pot.grid(0.01, 30.0)
    gf = lambda y: math.exp(-((y - 6.0) / 1.5) ** 2) * math.sin(y)
    g = GriddedField(np.array([gf(x) for x in grid.x]), grid)
    z = zero_resolvent(pot, g)
    ex = -quad(lambda y: y * gf(y), 0, 30, limit=200)[0]
    assert z.c == pytest.approx(ex, rel=1e-7)


def test_default_sweep():
    np.testing.assert_allclose(DEFAULT_SWEEP, np.geomspace(1e-5, 1e-2, 16))


def test_low_frequency_flat_has_no_tail():
    pot = flat(0)
    grid = pot.grid(0.05, 60.0)
    g = GriddedField(np.exp(-((grid.x - 20.0) / 2.0) ** 2), grid)
    lf = low_freq_expansion(pot, g, DEFAULT_SWEEP, check=False)
    assert lf.slope_first >= 0.95
    assert not tail_from_low_freq(lf, (200.0, 2000.0), x_obs=10.0).present


def test_radiation_check_accepts_exactly_outgoing_field():
    """Flat l = 0 beyond a compact source is exactly exp(-i tau x): zero residual passes."""
    pot = flat(0)
    grid = pot.grid(0.1, 2.0 ** 12)
    g = GriddedField(bump_profile(grid.x, 10.0, 3.0), grid)
    rc = radiation_check(resolvent_apply(pot, 1.0, g))
    assert rc.passed
