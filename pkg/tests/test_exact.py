import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import comb

from isingscan.exact import (OracleSizeError, auxiliary_ratio_integral, cw_disjoint_scan_rejection, exact_log_weights,
                             exact_magnetization_pmf, exact_pmf, exact_ratio, exact_summary, exact_tail)
from isingscan.invariants import (ghs_violation, gks_violation, mean_bound_violation, mean_identity_error,
                                  random_small_model)
from isingscan.model import ModelSpec, SignalSpec, build_complete, build_lattice


def cw_partition_by_counts(n, beta, s, A):
    """Z for Curie–Weiss with field A on s sites, summing over plus-counts (k inside, j outside)."""
    total = 0.0
    for k in range(s + 1):
        for j in range(n - s + 1):
            M = 2 * (k + j) - n
            total += comb(s, k) * comb(n - s, j) * math.exp(beta / (2 * n) * (M * M - n) + A * (2 * k - s))
    return total


def test_two_site_partition():
    for beta in (0.0, 0.7, 3.0):
        s = exact_summary(ModelSpec(build_complete(2), beta))
        assert math.exp(s.log_partition) == pytest.approx(4 * math.cosh(beta / 2), rel=1e-13)


def test_independent_partition():
    mu = np.array([0.3, 0.0, 1.2, 0.5])
    m = ModelSpec(build_lattice(2, 2), 0.0, SignalSpec.from_vector(mu))
    assert math.exp(exact_summary(m).log_partition) == pytest.approx(np.prod(2 * np.cosh(mu)), rel=1e-13)


def test_zero_field_means_vanish():
    s = exact_summary(ModelSpec(build_lattice(3, 2), 0.9))
    assert np.allclose(s.means, 0, atol=1e-14)


def test_summary_invariants():
    m = ModelSpec(build_lattice(3, 2, "plus"), 0.4, SignalSpec.uniform(9, [0, 4], 0.3))
    s = exact_summary(m, keep_pmf=True)
    assert abs(s.pmf.sum() - 1) < 1e-12
    assert np.allclose(s.covariances, s.covariances.T)
    assert np.allclose(np.diag(s.covariances), 1 - s.means ** 2)


def test_size_cap():
    with pytest.raises(OracleSizeError):
        exact_summary(ModelSpec(build_complete(23), 0.1))
    with pytest.raises(OracleSizeError):
        exact_pmf(ModelSpec(build_complete(12), 0.1), max_n=10)


def test_large_beta_is_finite():
    lw = exact_log_weights(ModelSpec(build_complete(16), 5.0))
    assert np.all(np.isfinite(lw))
    s = exact_summary(ModelSpec(build_complete(16), 5.0))
    assert np.isfinite(s.log_partition)


def test_tail_extremes():
    m = ModelSpec(build_complete(6), 0.8)
    assert exact_tail(m, [0, 1, 2], -math.sqrt(3) - 1e-9) == pytest.approx(1.0)
    assert exact_tail(m, [0, 1, 2], math.sqrt(3) + 1e-9) == 0.0


def test_tail_fixture():
    m = ModelSpec(build_complete(8), 0.5)
    val = exact_tail(m, [0, 1, 2, 3], 1.0)
    # Z_S > 1 needs all four spins of S plus; sum over plus-count j of the other four
    z = cw_partition_by_counts(8, 0.5, 4, 0.0)
    num = sum(comb(4, j) * math.exp(0.5 / 16 * ((2 * (4 + j) - 8) ** 2 - 8)) for j in range(5))
    assert val == pytest.approx(num / z, rel=1e-12)
    assert val == pytest.approx(0.09944689046322186, rel=1e-12)


def test_ratio_trivial_cases():
    g = build_complete(6)
    m = ModelSpec(g, 0.0, SignalSpec.uniform(6, [0, 1], 0.7))
    assert exact_ratio(m, m.null()) == pytest.approx(math.cosh(0.7) ** 2, rel=1e-13)
    m1 = ModelSpec(g, 0.9)
    assert exact_ratio(m1, m1.null()) == pytest.approx(1.0)


def test_ratio_fixture_and_integral():
    g = build_complete(12)
    m = ModelSpec(g, 0.5, SignalSpec.uniform(12, range(3), 0.4))
    ex = exact_ratio(m, m.null())
    indep = cw_partition_by_counts(12, 0.5, 3, 0.4) / cw_partition_by_counts(12, 0.5, 3, 0.0)
    assert ex == pytest.approx(indep, rel=1e-12)
    assert ex == pytest.approx(1.300843990411208, rel=1e-12)
    assert auxiliary_ratio_integral(12, 0.5, 3, 0.4) == pytest.approx(ex, abs=1e-6)


def test_ratio_mismatch():
    a = ModelSpec(build_complete(4), 0.5)
    b = ModelSpec(build_complete(5), 0.5)
    with pytest.raises(ValueError):
        exact_ratio(a, b)
    with pytest.raises(ValueError):
        exact_ratio(a, ModelSpec(build_complete(4), 0.6))


def test_integral_limits():
    assert auxiliary_ratio_integral(100, 0.7, 5, 0.0) == 1.0
    assert auxiliary_ratio_integral(100, 0.0, 5, 0.3) == pytest.approx(math.cosh(0.3) ** 5)
    val = auxiliary_ratio_integral(2000, 0.5, 10, 0.3)
    assert abs(val / math.cosh(0.3) ** 10 - 1) < 0.02


@pytest.mark.parametrize("n,beta,s,A", [(10, 1.5, 2, 0.3), (9, 1.0, 4, 1.1), (14, 2.5, 5, 0.2)])
def test_integral_matches_counts(n, beta, s, A):
    ref = cw_partition_by_counts(n, beta, s, A) / cw_partition_by_counts(n, beta, s, 0.0)
    assert auxiliary_ratio_integral(n, beta, s, A) == pytest.approx(ref, rel=1e-8)


def test_magnetization_pmf_matches_counts():
    n, beta = 10, 0.5
    pmf = exact_magnetization_pmf(ModelSpec(build_complete(n), beta))
    w = np.array([comb(n, k) * math.exp(beta / (2 * n) * ((2 * k - n) ** 2 - n)) for k in range(n + 1)])
    assert np.allclose(pmf, w / w.sum(), atol=1e-14)


def test_scan_rejection_oracle_against_enumeration():
    # 3 disjoint blocks of 2 sites in a 9-site Curie–Weiss model
    n, beta, s, K, t = 9, 0.8, 2, 3, 0.5
    m = ModelSpec(build_complete(n), beta)
    pmf = exact_pmf(m)
    b = np.arange(1 << n)
    x = 2 * ((b[:, None] >> np.arange(n)) & 1) - 1
    z = x[:, : s * K].reshape(-1, K, s).sum(axis=2) / math.sqrt(s)
    exact = pmf[(z > t).any(axis=1)].sum()
    assert cw_disjoint_scan_rejection(n, beta, s, K, t) == pytest.approx(exact, rel=1e-7)


def test_means_identity_by_enumeration():
    m = ModelSpec(build_lattice(3, 2, "plus"), 0.7, SignalSpec.uniform(9, [1, 5], 0.4))
    assert mean_identity_error(m) < 1e-10


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gks_property(seed):
    assert gks_violation(random_small_model(np.random.default_rng(seed), 8)) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ghs_property(seed):
    rng = np.random.default_rng(seed)
    assert ghs_violation(random_small_model(rng, 8), rng) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mean_lower_bound_property(seed):
    assert mean_bound_violation(random_small_model(np.random.default_rng(seed), 8)) <= 1e-12


def test_enumeration_order():
    # state b has x_i = +1 exactly when bit i of b is set
    m = ModelSpec(build_complete(3), 0.0, SignalSpec.uniform(3, [0], 1.0))
    pmf = exact_pmf(m)
    assert pmf[1] == pytest.approx(pmf[3]) and pmf[1] > pmf[0]
