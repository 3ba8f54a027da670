"""The eleven acceptance criteria at their stated tolerances.

Each test prints one PASS/FAIL line (also when output is captured) and then
asserts the tolerance on the measured numbers. ``python tests/test_acceptance.py``
runs the same checks without pytest.
"""

import math

import pytest

from localdecay import acceptance as acc


@pytest.fixture(scope="module")
def price(request):
    """One Schwarzschild l = 0 run at h = 0.05 to t = 2000 shared by the three tail checks."""
    return acc.price_run()


@pytest.fixture
def report(request):
    tr = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(result):
        line = result.line()
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)
        else:
            print(line)
        return result.measured

    return emit


def test_price_law_l0(price, report):
    m = report(acc.price_tail(price))
    assert m["window"] == [200.0, 2000.0]
    assert abs(m["p"] - 3.0) <= 0.15
    assert m["lld_drift"] < 0.1


def test_time_derivative_rate(price, report):
    m = report(acc.derivative_tail(price))
    assert abs(m["p"] - 4.0) <= 0.2


def test_full_cone_boundedness(price, report):
    m = report(acc.cone_bound(price, offsets=(20.0, 50.0, 100.0)))
    assert len(m["ratios"]) == 3
    assert max(m["ratios"]) < 1.5


def test_flat_huygens(report):
    m = report(acc.huygens())
    assert m["max_abs"] < 1e-10


def test_resolvent_oracle(report):
    m = report(acc.resolvent_oracle(taus=(0.1, 1.0, 10.0), n_random=20))
    assert len(m["rel_errors"]) == 3
    assert max(m["rel_errors"]) < 1e-6
    assert m["energy_points"] == 20
    assert m["worst_energy_ratio"] <= 1.0


def test_radiation_condition(report):
    m = report(acc.radiation(taus=(0.25, 0.5, 1.0, 2.0), last=4, factor=2.0))
    assert len(m["min_ratio_last_shells"]) == 4
    assert min(m["min_ratio_last_shells"]) >= 2.0


def test_uniform_resolvent_bound(report):
    m = report(acc.uniform_bound(n=40, tau_range=(1e-3, 10.0)))
    assert m["variation"] < 10.0
    assert m["flagged"] == 0
    assert m["control_flagged"] > 0


def test_zero_resolvent_expansion(report):
    m = report(acc.zero_expansion())
    assert abs(m["flat_c"] - 1.0 / (4.0 * math.pi)) <= 1e-4
    assert m["schwarzschild_drift"] < 0.01


def test_low_frequency_expansion(report):
    m = report(acc.low_frequency())
    assert min(m["first"]) >= 0.95
    assert min(m["second"]) >= 1.7


def test_pipeline_closure(report):
    m = report(acc.pipeline_closure())
    assert m["cases"] == ["minkowski l=0", "minkowski l=1", "schwarzschild l=0",
                          "schwarzschild l=1"]
    assert max(m["l2_rel"]) < 0.01


def test_scheme_convergence(report):
    m = report(acc.convergence())
    assert 3.5 <= m["order"] <= 4.5


if __name__ == "__main__":
    import sys
    results = acc.run_checks(log=print)
    sys.exit(0 if all(r.passed for r in results) else 1)
