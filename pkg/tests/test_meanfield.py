import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isingscan.meanfield import (HIGH, LOW, CutoffSpec, InfeasibleSignalError, figure1_table, low_temp_cutoff,
                                 scan_cutoff, sharp_constant, signal_strength_for_constant, solve_m)


def test_m_at_two():
    assert solve_m(2.0).m == pytest.approx(0.9575040240772688, abs=1e-12)


@pytest.mark.parametrize("beta", [0.0, 0.3, 1.0])
def test_m_vanishes_up_to_one(beta):
    assert solve_m(beta).m == 0.0
    assert sharp_constant(beta) == math.sqrt(2)


def test_constant_values():
    m = 0.9575040240772688
    assert sharp_constant(2.0) == pytest.approx(math.sqrt(2) * math.cosh(2 * m), rel=1e-12)
    assert sharp_constant(2.0) == pytest.approx(4.9033, abs=1e-4)
    # continuous at the critical point
    assert sharp_constant(1 + 1e-6) == pytest.approx(math.sqrt(2), rel=1e-5)


def test_m_large_beta_near_one():
    assert solve_m(20.0).m == pytest.approx(1.0, abs=1e-12)


def test_negative_beta():
    with pytest.raises(ValueError):
        solve_m(-0.5)


def test_fixed_point_residual_on_grid():
    for b in np.linspace(1.0, 6.0, 1000)[1:]:
        sol = solve_m(b)
        assert abs(sol.m - math.tanh(b * sol.m)) < 1e-12
        assert sol.m > 0


@settings(max_examples=200, deadline=None)
@given(st.floats(1.0001, 50.0), st.floats(1.0001, 50.0))
def test_m_increasing(b1, b2):
    lo, hi = sorted((b1, b2))
    assert solve_m(lo).m <= solve_m(hi).m + 1e-15


@settings(max_examples=200, deadline=None)
@given(st.floats(1.0001, 30.0))
def test_m_is_largest_root(beta):
    m = solve_m(beta).m
    # g(x) = tanh(βx) - x is negative everywhere above the root
    xs = np.linspace(m + 1e-9, 1.0, 200)
    assert np.all(np.tanh(beta * xs) - xs <= 1e-12)


def test_high_cutoff():
    spec = CutoffSpec(0.2, math.log(1000), 10)
    assert scan_cutoff(spec, 0.5) == pytest.approx(math.sqrt(2 * 1.2 * math.log(1000)))
    assert scan_cutoff(CutoffSpec(0.2, 0.0, 10), 0.5) == 0.0


def test_low_cutoff():
    spec = CutoffSpec(0.1, math.log(50), 16, LOW)
    shift, offset = scan_cutoff(spec, 2.0)
    m = solve_m(2.0).m
    assert shift == pytest.approx(4 * m)
    assert offset == pytest.approx(math.sqrt(2 * 1.1 * (1 - m * m) * math.log(50)))
    assert low_temp_cutoff(0.1, math.log(50), 16, m) == (shift, offset)
    with pytest.raises(ValueError):
        scan_cutoff(spec, 0.9)


@pytest.mark.parametrize("kw", [dict(delta=0.0, log_class_size=1.0, s=1), dict(delta=0.1, log_class_size=-1.0, s=1),
                                dict(delta=0.1, log_class_size=1.0, s=0),
                                dict(delta=0.1, log_class_size=1.0, s=1, regime="warm")])
def test_cutoff_spec_validation(kw):
    with pytest.raises(ValueError):
        CutoffSpec(**kw)


def test_signal_strength_inverts_constant():
    s, logK, beta = 100, math.log(20), 0.5
    A = signal_strength_for_constant(2.0, s, logK, beta)
    assert math.sqrt(s) * math.tanh(A) / math.sqrt(logK) == pytest.approx(2 * math.sqrt(2))
    assert signal_strength_for_constant(0.0, s, logK, beta) == 0.0
    Al = signal_strength_for_constant(1.0, 25, math.log(100), 0.3, family="lattice", chi=2.0)
    assert math.tanh(Al) == pytest.approx(2 * math.sqrt(math.log(100) / 25))


def test_signal_strength_errors():
    with pytest.raises(InfeasibleSignalError):
        signal_strength_for_constant(10.0, 4, math.log(100), 2.0)
    with pytest.raises(ValueError):
        signal_strength_for_constant(1.0, 4, 1.0, 0.5, family="lattice")
    with pytest.raises(ValueError):
        signal_strength_for_constant(-1.0, 4, 1.0, 0.5)
    with pytest.raises(ValueError):
        signal_strength_for_constant(1.0, 4, 1.0, 0.5, family="tree")


def test_constant_table():
    t = figure1_table(3.0, 100)
    assert t.shape == (100, 3)
    assert t[0, 0] == pytest.approx(0.03) and t[-1, 0] == pytest.approx(3.0)
    assert np.all(t[t[:, 0] <= 1, 2] == math.sqrt(2))
    assert np.all(np.diff(t[:, 2]) >= 0)
    with pytest.raises(ValueError):
        figure1_table(0.0, 10)


def test_regime_names():
    assert HIGH != LOW
