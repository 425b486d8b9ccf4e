import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isingscan.classes import ScanClass, build_rectangle_class, build_scan_grid, disjoint_blocks, RectangleGridParams
from isingscan.detectors import (TestDecision as Decision, bonferroni_combine, candidate_sums, centered_sum_multiplier,
                                 centered_sum_test, estimate_null_means, high_temp_scan_test, lattice_scan_test,
                                 low_temp_randomized_scan_test, scan_statistics, scan_z, window_sums,
                                 write_decisions_csv)
from isingscan.exact import cw_disjoint_scan_rejection, enumerate_states, exact_pmf
from isingscan.meanfield import solve_m
from isingscan.model import ModelSpec, build_complete, build_lattice
from isingscan.samplers import curie_weiss_exact_sample


def naive_sums(X, cls):
    return np.array([[x[S].sum() for S in cls] for x in np.atleast_2d(X)])


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 9), st.integers(1, 3), st.integers(1, 3), st.integers(0, 2**31))
def test_window_sums_match_naive(L, d, k, seed):
    if k > L or L ** d > 800:
        return
    X = np.random.default_rng(seed).choice(np.array([-1, 1], dtype=np.int8), size=(2, L ** d))
    cls = build_rectangle_class(L ** d, d, k ** d)
    assert np.array_equal(window_sums(X, L, d, k), naive_sums(X, cls))
    assert np.array_equal(candidate_sums(X, cls), naive_sums(X, cls))


def test_grid_and_explicit_sums_agree():
    X = np.random.default_rng(0).choice([-1, 1], size=(3, 144)).astype(np.int8)
    grid = build_scan_grid(RectangleGridParams(144, 2, 9, 0.5))
    explicit = ScanClass.from_supports(144, grid.supports)
    assert np.array_equal(candidate_sums(X, grid), candidate_sums(X, explicit))
    assert candidate_sums(X, explicit).dtype == np.int64


def test_float_input_and_centering():
    cls = disjoint_blocks(6, 2)
    x = np.array([1, 1, -1, 1, -1, -1])
    c = np.full(6, 0.5)
    z = scan_z(x, cls, c)[0]
    assert np.allclose(z, (np.array([2, 0, -2]) - 1.0) / math.sqrt(2))
    with pytest.raises(ValueError):
        candidate_sums(np.ones(5), cls)


def test_scan_statistics_ties_go_to_lowest_index():
    cls = disjoint_blocks(6, 2)
    st_ = scan_statistics(np.array([1, 1, -1, -1, 1, 1]), cls)
    assert st_.argmax == 0 and st_.z_max == pytest.approx(math.sqrt(2))
    with pytest.raises(ValueError):
        scan_statistics(np.ones((2, 6)), cls)


def test_high_temp_threshold_and_strictness():
    cls = disjoint_blocks(100, 10)
    t = math.sqrt(2 * 1.2 * math.log(10))
    d = high_temp_scan_test(np.ones(100), cls, 0.2)
    assert d.threshold == pytest.approx(t) and d.reject
    assert not high_temp_scan_test(None, cls, 0.2, z_max=t).reject
    assert high_temp_scan_test(None, cls, 0.2, z_max=t + 1e-12).reject
    with pytest.raises(ValueError):
        high_temp_scan_test(np.ones(100), cls, 0.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 99))
def test_flipping_up_never_hurts(seed, i):
    # scan decisions are monotone in each coordinate
    cls = build_rectangle_class(100, 2, 9)
    x = np.random.default_rng(seed).choice(np.array([-1, 1], dtype=np.int8), 100)
    up = x.copy()
    up[i] = 1
    a, b = high_temp_scan_test(x, cls, 0.1), high_temp_scan_test(up, cls, 0.1)
    assert b.statistic >= a.statistic and (b.reject or not a.reject)
    la = low_temp_randomized_scan_test(x, cls, 1.5, 0.1, w=0.3)
    lb = low_temp_randomized_scan_test(up, cls, 1.5, 0.1, w=0.3)
    assert lb.reject or not la.reject


def test_low_temp_branches():
    cls = disjoint_blocks(400, 16)
    m = solve_m(1.5).m
    off = math.sqrt(2 * 1.2 * (1 - m * m) * math.log(25))
    pos = low_temp_randomized_scan_test(None, cls, 1.5, 0.2, w=0.1, z_max=0.0)
    neg = low_temp_randomized_scan_test(None, cls, 1.5, 0.2, w=-0.1, z_max=0.0)
    assert pos.branch == "positive" and pos.threshold == pytest.approx(4 * m + off)
    assert neg.branch == "negative" and neg.threshold == pytest.approx(-4 * m + off)
    assert low_temp_randomized_scan_test(None, cls, 1.5, 0.2, w=0.0, z_max=0.0).branch == "negative"
    with pytest.raises(ValueError):
        low_temp_randomized_scan_test(np.ones(400), cls, 0.9, 0.2, rng=np.random.default_rng(0))
    with pytest.raises(ValueError):
        low_temp_randomized_scan_test(np.ones(400), cls, 1.5, 0.2)


def test_low_temp_draw_law():
    cls = disjoint_blocks(100, 10)
    x = np.ones(100)
    x[:30] = -1
    rng = np.random.default_rng(1)
    w = np.array([low_temp_randomized_scan_test(x, cls, 2.0, 0.2, rng).w for _ in range(20000)])
    assert w.mean() == pytest.approx(0.4, abs=0.002)
    assert w.std() == pytest.approx(1 / math.sqrt(200), rel=0.03)


def test_lattice_threshold():
    cls = build_rectangle_class(64, 2, 4)
    d = lattice_scan_test(np.ones(64), cls, 2.5, 0.2)
    assert d.threshold == pytest.approx(math.sqrt(2 * 1.2 * 2.5 * math.log(49)))
    with pytest.raises(ValueError):
        lattice_scan_test(np.ones(64), cls, 0.0, 0.2)


def test_centered_sum():
    beta = 1.5
    m = solve_m(beta).m
    n = 100
    x = -np.ones(n)
    d = centered_sum_test(x, beta)
    assert d.statistic == pytest.approx(-n + n * m)
    assert d.threshold == pytest.approx(3 * math.sqrt(n * (1 - m * m)))
    # an exactly balanced configuration uses sign +1
    bal = np.array([1, -1] * 50)
    assert centered_sum_test(bal, beta).statistic == pytest.approx(-n * m)
    assert not centered_sum_test(np.ones(n), beta).reject
    assert centered_sum_test(np.ones(1000), beta).reject
    assert centered_sum_test(np.ones(n), 0.5).statistic == n


def test_centered_sum_multiplier():
    assert centered_sum_multiplier(0.05, 0.5) == pytest.approx(1.6448536269514722 / math.sqrt(0.5))
    with pytest.raises(ValueError):
        centered_sum_multiplier(0.05, 1.0)


def test_bonferroni():
    a = Decision("a", False, 1.0, 2.0)
    b = Decision("b", True, 3.0, 2.5)
    c = bonferroni_combine(a, b)
    assert c.reject and c.statistic == pytest.approx(0.5) and c.threshold == 0.0
    assert c.components == (a, b) and c.test_name == "bonferroni(a,b)"
    assert not bonferroni_combine(a, a).reject


def test_decision_rows(tmp_path):
    d = Decision("x", True, 0.1, 0.05)
    assert d.to_row() == ("x", "0.1", "0.05", "none", 1)
    p = tmp_path / "d.csv"
    write_decisions_csv(p, [d])
    assert p.read_text().splitlines() == ["test_name,statistic,threshold,branch,reject", "x,0.1,0.05,none,1"]


def test_high_temp_type1_exact_vs_monte_carlo():
    n, beta, s, K, delta = 12, 0.5, 4, 3, 0.2
    cls = disjoint_blocks(n, s, K)
    pmf = exact_pmf(ModelSpec(build_complete(n), beta))
    X = enumerate_states(n, 0, 1 << n)
    rej = np.array([high_temp_scan_test(x, cls, delta).reject for x in X])
    exact = pmf[rej].sum()
    assert exact > 0.01
    t = math.sqrt(2 * (1 + delta) * math.log(K))
    assert exact == pytest.approx(cw_disjoint_scan_rejection(n, beta, s, K, t), rel=1e-7)
    draws = curie_weiss_exact_sample(n, beta, None, np.random.default_rng(2), count=20000)
    mc = np.mean([high_temp_scan_test(x, cls, delta).reject for x in draws])
    assert abs(mc - exact) < 4 * math.sqrt(exact * (1 - exact) / 20000)


def test_randomized_type1_exact_vs_monte_carlo():
    # enumerate X, integrate the Gaussian draw W analytically
    from scipy.stats import norm
    n, beta, s, K, delta = 12, 1.5, 4, 3, 0.05
    cls = disjoint_blocks(n, s, K)
    pmf = exact_pmf(ModelSpec(build_complete(n), beta))
    X = enumerate_states(n, 0, 1 << n)
    total = 0.0
    for x, p in zip(X, pmf):
        z = scan_statistics(x, cls).z_max
        p_pos = norm.sf(0, loc=x.mean(), scale=1 / math.sqrt(n * beta))
        rp = low_temp_randomized_scan_test(None, cls, beta, delta, w=1.0, z_max=z).reject
        rn = low_temp_randomized_scan_test(None, cls, beta, delta, w=-1.0, z_max=z).reject
        total += p * (p_pos * rp + (1 - p_pos) * rn)
    assert total > 0.01
    m = solve_m(beta).m
    t = math.sqrt(2 * (1 + delta) * (1 - m * m) * math.log(K))
    assert total == pytest.approx(cw_disjoint_scan_rejection(n, beta, s, K, t, shift_by_sign=m), rel=1e-6)
    rng = np.random.default_rng(3)
    draws = curie_weiss_exact_sample(n, beta, None, rng, count=20000)
    mc = np.mean([low_temp_randomized_scan_test(x, cls, beta, delta, rng).reject for x in draws])
    assert abs(mc - total) < 4 * math.sqrt(total * (1 - total) / 20000)


def test_null_means_cached_and_symmetric():
    m = ModelSpec(build_lattice(6, 2, "plus"), 0.3)
    a = estimate_null_means(m, 50, 5)
    assert estimate_null_means(m, 50, 5) is a
    assert a.shape == (36,) and np.all(a > 0)
    assert not a.flags.writeable
