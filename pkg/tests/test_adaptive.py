import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isingscan.adaptive import (HIGH_DEPENDENCE, LOW_OR_CRITICAL, ChiTable, adaptive_test, build_chi_table,
                                default_chi_grid, fit_beta_pseudolikelihood, pseudo_likelihood_score,
                                regime_classifier)
from isingscan.classes import build_rectangle_class, disjoint_blocks
from isingscan.detectors import high_temp_scan_test, lattice_scan_test, low_temp_randomized_scan_test
from isingscan.model import ModelSpec, build_complete, build_lattice
from isingscan.samplers import curie_weiss_exact_sample, sample_null
from isingscan.susceptibility import BETA_C_2D


def test_classifier_boundary():
    n = 100
    cut = 1 / math.log(n)
    x = -np.ones(n)
    k = math.ceil(n * (1 + cut) / 2)
    x[:k] = 1
    assert regime_classifier(x) == HIGH_DEPENDENCE
    x[k - 1] = -1
    assert abs(x.mean()) < cut and regime_classifier(x) == LOW_OR_CRITICAL
    assert regime_classifier(-np.ones(n)) == HIGH_DEPENDENCE
    with pytest.raises(ValueError):
        regime_classifier([1, 1])


def test_classifier_separates_regimes():
    rng = np.random.default_rng(0)
    hot = curie_weiss_exact_sample(2000, 0.5, None, rng, count=100)
    cold = curie_weiss_exact_sample(2000, 1.5, None, rng, count=100)
    assert all(regime_classifier(x) == LOW_OR_CRITICAL for x in hot)
    assert all(regime_classifier(x) == HIGH_DEPENDENCE for x in cold)


def test_score_sign_and_root():
    x = curie_weiss_exact_sample(3000, 1.4, None, np.random.default_rng(1))
    g = build_complete(3000)
    fit = fit_beta_pseudolikelihood(x, g)
    m = g.neighbor_sum(x.astype(float))
    assert fit.clamped is None
    assert abs(pseudo_likelihood_score(fit.beta_hat, x, m)) < 1e-12
    assert pseudo_likelihood_score(fit.beta_hat - 0.1, x, m) > 0 > pseudo_likelihood_score(fit.beta_hat + 0.1, x, m)
    assert fit.score_slope < 0


def test_pseudolikelihood_consistency_curie_weiss():
    rng = np.random.default_rng(2)
    g = build_complete(5000)
    X = curie_weiss_exact_sample(5000, 1.5, None, rng, count=20)
    err = [fit_beta_pseudolikelihood(x, g).beta_hat - 1.5 for x in X]
    assert np.mean(np.abs(err)) < 0.1


def test_pseudolikelihood_consistency_lattice():
    g = build_lattice(48, 2)
    X = sample_null(ModelSpec(g, 0.3), 10, np.random.default_rng(3))
    err = [fit_beta_pseudolikelihood(x, g).beta_hat - 0.3 for x in X]
    assert np.mean(np.abs(err)) < 0.05


def test_pseudolikelihood_clamps():
    g = build_lattice(5, 2)
    up = fit_beta_pseudolikelihood(np.ones(25), g, beta_max=4.0)
    assert up.beta_hat == 4.0 and up.clamped == "upper"
    checker = np.array([(-1) ** (i // 5 + i % 5) for i in range(25)])
    low = fit_beta_pseudolikelihood(checker, g)
    assert low.beta_hat == 0.0 and low.clamped == "lower"


def test_pinned_sites_leave_score():
    g = build_lattice(6, 2)
    x = sample_null(ModelSpec(g, 0.3), 1, np.random.default_rng(4))[0]
    pinned = np.arange(6)
    a = fit_beta_pseudolikelihood(x, g, pinned=pinned)
    y = x.copy()
    y[pinned] = -1
    b = fit_beta_pseudolikelihood(y, g, pinned=pinned)
    assert a.beta_hat == b.beta_hat


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_complete_graph_fit_is_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    x = curie_weiss_exact_sample(300, 1.3, None, rng)
    g = build_complete(300)
    a = fit_beta_pseudolikelihood(x, g).beta_hat
    b = fit_beta_pseudolikelihood(rng.permutation(x), g).beta_hat
    assert a == pytest.approx(b, rel=1e-9, abs=1e-12)


def test_composition_low_branch():
    cls = disjoint_blocks(2000, 100, 20)
    X = curie_weiss_exact_sample(2000, 0.5, None, np.random.default_rng(5), count=30)
    for x in X:
        d = adaptive_test(x, cls, 0.2, None)
        ref = high_temp_scan_test(x, cls, 0.2)
        assert d.test_name == "adaptive[high_temp_scan]"
        assert (d.reject, d.statistic, d.threshold) == (ref.reject, ref.statistic, ref.threshold)


def test_composition_high_branch():
    cls = disjoint_blocks(2000, 100, 20)
    X = curie_weiss_exact_sample(2000, 1.5, None, np.random.default_rng(6), count=30)
    for k, x in enumerate(X):
        d = adaptive_test(x, cls, 0.2, np.random.default_rng(k))
        bh = fit_beta_pseudolikelihood(x, build_complete(2000)).beta_hat
        ref = low_temp_randomized_scan_test(x, cls, bh, 0.2, np.random.default_rng(k))
        assert d.info["beta_hat"] == bh and d.info["regime"] == HIGH_DEPENDENCE
        assert (d.reject, d.statistic, d.threshold, d.w) == (ref.reject, ref.statistic, ref.threshold, ref.w)


def test_forced_high_branch_with_small_beta_hat_uses_beta_free_test():
    cls = disjoint_blocks(2000, 100, 20)
    x = curie_weiss_exact_sample(2000, 0.3, None, np.random.default_rng(7))
    d = adaptive_test(x, cls, 0.2, np.random.default_rng(0), force_branch=HIGH_DEPENDENCE)
    assert d.info["beta_hat"] <= 1 and d.test_name == "adaptive[high_temp_scan]"
    with pytest.raises(ValueError):
        adaptive_test(x, cls, 0.2, None, force_branch="lukewarm")
    with pytest.raises(ValueError):
        adaptive_test(x, cls, 0.2, None, family="tree")


def test_chi_table_interpolation():
    t = ChiTable(np.array([0.0, 0.2]), np.array([1.0, 3.0]), np.array([[0.0, 0.0], [0.4, 0.2]]), "plus", 4)
    assert t.chi(0.1) == pytest.approx(2.0) and t.chi(0.5) == 3.0
    assert np.allclose(t.centering(0.05), [0.1, 0.05])
    assert np.allclose(t.centering(-1), [0, 0]) and np.allclose(t.centering(1), [0.4, 0.2])


def test_default_grid():
    free = default_chi_grid("free")
    plus = default_chi_grid("plus")
    assert len(free) == len(plus) == 20
    assert free.max() < BETA_C_2D and np.all(np.abs(plus - BETA_C_2D) >= 0.04 - 1e-12)
    assert (plus > BETA_C_2D).sum() == 10


def test_lattice_pipeline_uses_table():
    g = build_lattice(20, 2, "plus")
    table = build_chi_table(g, 4, seed=1, betas=[0.1, 0.3, 0.6], replications=100)
    assert table.means.shape == (3, 400) and np.all(table.chis > 0)
    cls = build_rectangle_class(400, 2, 4)
    x = sample_null(ModelSpec(g, 0.3), 1, np.random.default_rng(8))[0]
    d = adaptive_test(x, cls, 0.2, None, "lattice", graph=g, chi_table=table)
    bh = d.info["beta_hat"]
    ref = lattice_scan_test(x, cls, table.chi(bh), 0.2, table.centering(bh))
    assert d.test_name == "adaptive[lattice_scan]"
    assert (d.reject, d.statistic, d.threshold) == (ref.reject, ref.statistic, ref.threshold)
    assert d.info["near_critical"] == (abs(bh - BETA_C_2D) < 0.02)
    with pytest.raises(ValueError):
        adaptive_test(x, cls, 0.2, None, "lattice", graph=g)
    with pytest.raises(ValueError):
        build_chi_table(build_complete(10), 4, 0)
