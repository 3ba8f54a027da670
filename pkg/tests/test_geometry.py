import numpy as np
import pytest
from hypothesis import given, strategies as st

from localdecay.errors import DecayViolation, InvalidBackground
from localdecay.geometry import (BackgroundMetric, RadialFunction, bracket, mode_potential,
                                 normalize_coordinates, schwarzschild_r_of_x)


def tortoise_closed_form(r, M):
    return r + 2 * M * np.log(r / (2 * M) - 1)


def regge_wheeler(r, M, ell):
    return (1 - 2 * M / r) * (ell * (ell + 1) / r ** 2 + 2 * M / r ** 3)


def test_bracket():
    assert bracket(0.0) == pytest.approx(2.0)
    np.testing.assert_allclose(bracket(np.array([3.0, 1e6])), [np.sqrt(13.0), np.sqrt(1e12 + 4)])


@pytest.mark.parametrize("M", [0.5, 1.0, 3.0])
def test_schwarzschild_tortoise_matches_closed_form(M):
    op = normalize_coordinates(BackgroundMetric.schwarzschild(M))
    r = np.array([2.2, 3.0, 4.0, 10.0, 100.0, 1e4]) * M
    np.testing.assert_allclose(op.x_of_r(r), tortoise_closed_form(r, M), rtol=1e-9, atol=1e-9 * M)
    # the additive constant puts x(4M) at 4M
    assert float(op.x_of_r(4.0 * M)) == pytest.approx(4.0 * M, abs=1e-10)


@given(st.floats(min_value=-20.0, max_value=5000.0), st.floats(min_value=0.2, max_value=5.0))
def test_schwarzschild_r_of_x_inverts(s, M):
    # below x = -20M the closed form itself loses digits in log(r/2M - 1)
    x = s * M
    r = schwarzschild_r_of_x(x, M)
    assert r > 2 * M
    assert tortoise_closed_form(r, M) == pytest.approx(x, abs=1e-9 * max(1.0, abs(x)))


@given(st.floats(min_value=2.05, max_value=1e4))
def test_operator_round_trip(r):
    op = normalize_coordinates(BackgroundMetric.schwarzschild(1.0))
    assert float(op.r_of_x(op.x_of_r(r))) == pytest.approx(r, rel=1e-9)


@pytest.mark.parametrize("ell", [0, 1, 2])
def test_mode_potential_is_regge_wheeler(ell):
    pot = mode_potential(normalize_coordinates(BackgroundMetric.schwarzschild(1.0)), ell)
    x = np.linspace(-30, 300, 50)
    r = schwarzschild_r_of_x(x, 1.0)
    np.testing.assert_allclose(pot(x), regge_wheeler(r, 1.0, ell), rtol=1e-7, atol=1e-14)
    assert pot.left == "horizon"


@pytest.mark.parametrize("ell", [0, 1, 3])
def test_flat_mode_potential(ell):
    pot = mode_potential(normalize_coordinates(BackgroundMetric.minkowski()), ell)
    x = np.linspace(0.5, 50, 20)
    np.testing.assert_allclose(pot(x), ell * (ell + 1) / x ** 2, rtol=1e-10, atol=1e-14)
    assert pot.left == "regular"


def test_time_shift_is_removed():
    """A dt dr cross term introduced by t -> t + b(r) must not change the mode problem."""
    plain = mode_potential(normalize_coordinates(BackgroundMetric.schwarzschild(1.0)), 1)
    shifted_metric = BackgroundMetric.schwarzschild(1.0, time_shift=lambda r: 1.0 / (r + 3.0))
    shifted = mode_potential(normalize_coordinates(shifted_metric), 1)
    x = np.linspace(-20, 200, 30)
    np.testing.assert_allclose(shifted(x), plain(x), rtol=1e-6, atol=1e-12)


def test_residuals_of_normalized_form_vanish():
    op = normalize_coordinates(BackgroundMetric.schwarzschild(1.0))
    a, b = op.hrrtt_residuals(np.geomspace(2.5, 1e3, 20))
    assert np.max(np.abs(a)) < 1e-10 and np.max(np.abs(b)) < 1e-10


def test_invalid_backgrounds():
    with pytest.raises(InvalidBackground):
        BackgroundMetric.schwarzschild(-1.0)
    with pytest.raises(InvalidBackground):
        BackgroundMetric.schwarzschild(1.0, R0=3.0)
    with pytest.raises(DecayViolation):
        BackgroundMetric.custom(g_rr=lambda r: 1.0 / np.sqrt(r))


def test_radial_function_from_table_continues_power_law():
    r = np.geomspace(1.0, 100.0, 200)
    f = RadialFunction.from_table(r, 3.0 / r ** 2)
    np.testing.assert_allclose(f(np.array([2.0, 50.0])), 3.0 / np.array([2.0, 50.0]) ** 2, rtol=1e-6)
    assert float(f(1000.0)) == pytest.approx(3e-6, rel=1e-6)
    np.testing.assert_allclose(f.derivative(np.array([10.0])), [-6.0 / 1000.0], rtol=1e-5)
