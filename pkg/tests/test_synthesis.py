import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import exp1

from localdecay.errors import AliasError
from localdecay.evolve import gaussian_data, initial_data
from localdecay.geometry import BackgroundMetric, mode_potential, normalize_coordinates
from localdecay.resolvent import DEFAULT_SWEEP
from localdecay.synthesis import (SynthesisPlan, barycentric_matrix, cc_points, fit_log_terms,
                                  plan_for, synthesize, tail_from_low_freq)


@settings(max_examples=40)
@given(st.integers(2, 20), st.floats(-5, 5), st.floats(0.01, 10),
       st.lists(st.floats(-3, 3), min_size=1, max_size=21))
def test_barycentric_reproduces_polynomials(n, a, width, coeffs):
    coeffs = coeffs[: n + 1]
    nodes = cc_points(a, a + width, n)
    x = np.linspace(a, a + width, 37)
    p = np.polynomial.Polynomial(coeffs, domain=[a, a + width])
    got = barycentric_matrix(nodes, x) @ p(nodes)
    assert np.allclose(got, p(x), atol=1e-9 * max(1.0, np.max(np.abs(p(x)))))


def test_cc_points_endpoints():
    pts = cc_points(1.0, 3.0, 8)
    assert len(pts) == 9 and pts[0] == 1.0 and pts[-1] == pytest.approx(3.0)
    assert np.all(np.diff(pts) > 0)


@pytest.mark.parametrize("t", [0.0, 3.7, 50.0, 399.0])
def test_weights_integrate_oscillatory_exactly(t):
    """Q @ f(nodes) against closed forms for f = 1 and f = tau."""
    plan = SynthesisPlan(tau_max=4.0, times=(0.0, 400.0, 11))
    nodes = plan.positive_nodes()
    Q = plan.weights(np.array([t]))[0]
    T = plan.tau_max
    if t == 0:
        ex0, ex1 = T, T * T / 2
    else:
        e = np.exp(1j * T * t)
        ex0 = (e - 1) / (1j * t)
        ex1 = T * e / (1j * t) + (e - 1) / t ** 2
    assert Q @ np.ones_like(nodes) == pytest.approx(ex0, rel=1e-11, abs=1e-12)
    assert Q @ nodes == pytest.approx(ex1, rel=1e-11, abs=1e-12)


def test_innermost_panel_is_low_degree():
    plan = SynthesisPlan()
    assert plan.panel_degree(0) == 4 and plan.panel_degree(1) == plan.degree
    assert plan.panels()[0] == (0.0, 2.0 ** -plan.k_min)


def test_alias_guard():
    SynthesisPlan(k_min=10, times=(0.0, 128.0, 11))
    with pytest.raises(AliasError):
        SynthesisPlan(k_min=10, times=(0.0, 128.5, 11))


def laplace_inverse_square(s):
    """int_0^inf exp(-s t) (1 + t)^-2 dt = 1 - s e^s E1(s)."""
    return 1.0 - s * np.exp(s) * exp1(s)


def test_log_terms_of_known_transform():
    """(1 + t)^-2 has log terms s log s (1 + s + s^2 / 2 + ...), tail t^-2."""
    taus = DEFAULT_SWEEP
    vals = laplace_inverse_square(1j * taus)
    a, b, z = fit_log_terms(taus, vals, K=4)
    assert b[1] == pytest.approx(1.0, abs=1e-8)
    assert b[2] == pytest.approx(1.0, abs=1e-4)
    assert z[1] > 100
    fake = SimpleNamespace(x=np.array([0.0]), taus=taus, samples=vals[:, None])
    tp = tail_from_low_freq(fake, (200.0, 2000.0), x_obs=0.0)
    assert tp.present and tp.order == 1
    assert tp.amplitude == pytest.approx(1.0, abs=1e-6)
    assert tp.exponent == pytest.approx(2.0, abs=0.01)


@settings(max_examples=30)
@given(st.lists(st.floats(-2, 2), min_size=5, max_size=5),
       st.lists(st.floats(-2, 2), min_size=4, max_size=4))
def test_fit_log_terms_recovers_planted(a_true, b_true):
    taus = np.geomspace(1e-4, 1e-1, 24)
    s, ls = 1j * taus, np.log(taus) + 0.5j * np.pi
    vals = sum(c * s ** k for k, c in enumerate(a_true))
    vals = vals + sum(c * s ** (k + 1) * ls for k, c in enumerate(b_true))
    a, b, _ = fit_log_terms(taus, vals, K=4)
    np.testing.assert_allclose(a[:2], a_true[:2], atol=1e-8)
    np.testing.assert_allclose(b[1], b_true[0], atol=1e-6)


def test_synthesis_matches_dalembert():
    """Flat l = 0 static data: the observer sees the odd-extended d'Alembert wave."""
    pot = mode_potential(normalize_coordinates(BackgroundMetric.minkowski()), 0)
    grid = pot.grid(0.05, 60.0)
    g = lambda x: np.exp(-((np.asarray(x) - 20.0) / 2.0) ** 2)
    data = initial_data(grid, g, kind="static")
    plan = plan_for(data, 60.0, nt=601)
    res = synthesize(pot, data, plan, [10.0])
    t = res.times
    ex = 0.5 * (g(10.0 - t) - g(t - 10.0) + g(10.0 + t) - g(-10.0 - t))
    assert np.max(np.abs(res.phi[:, 0] - ex)) < 1e-5
    assert res.imag_ratio < 1e-12


def test_negative_half_by_conjugation():
    pot = mode_potential(normalize_coordinates(BackgroundMetric.schwarzschild(1.0)), 0)
    grid = pot.grid(0.1, 50.0, -60.0)
    data = gaussian_data(grid)
    # coarse plan: the symmetry does not depend on resolving the tail
    plan = SynthesisPlan(tau_max=3.5, k_min=9, degree=8, times=(0.0, 40.0, 81))
    a = synthesize(pot, data, plan, [10.0])
    b = synthesize(pot, data, plan, [10.0], explicit_negative=True)
    assert np.max(np.abs(a.phi - b.phi)) < 1e-7 * np.max(np.abs(a.phi))
    assert b.imag_ratio < 1e-6
