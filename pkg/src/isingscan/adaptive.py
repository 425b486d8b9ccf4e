"""Tests for unknown β: regime classification, pseudo-likelihood, composition.

Mean-field pipeline: if |X̄| < 1/log n the configuration is treated as high or
critical temperature and the β-free scan test is used.  Otherwise β is
estimated by pseudo-likelihood and the randomized low-temperature scan runs
with m(β̂).

Lattice pipeline: β̂ by pseudo-likelihood, χ(β̂) (and for the plus boundary the
per-site null means) interpolated from a precomputed table, then the lattice
scan test.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .classes import ScanClass, integer_root_ceil
from .detectors import TestDecision, high_temp_scan_test, lattice_scan_test, low_temp_randomized_scan_test
from .model import CouplingGraph, ModelSpec, build_complete
from .samplers import ChainConfig, replication_rng, sample_null
from .susceptibility import BETA_C_2D, block_sites, interior_margin, jackknife_variance

__all__ = [
    "LOW_OR_CRITICAL",
    "HIGH_DEPENDENCE",
    "EstimationError",
    "PseudoLikelihoodFit",
    "ChiTable",
    "regime_classifier",
    "pseudo_likelihood_score",
    "fit_beta_pseudolikelihood",
    "default_chi_grid",
    "build_chi_table",
    "adaptive_test",
]

LOW_OR_CRITICAL = "low_or_critical_beta"
HIGH_DEPENDENCE = "high_beta_dependence"
BETA_MAX = 10.0


class EstimationError(ValueError):
    """All local fields vanish, so the score carries no information on β."""


def regime_classifier(x) -> str:
    """``high_beta_dependence`` iff |X̄| ≥ 1/log n."""
    x = np.asarray(x)
    n = x.shape[-1]
    if n < 3:
        raise ValueError("the classifier needs n >= 3")
    return HIGH_DEPENDENCE if abs(float(x.mean())) >= 1.0 / math.log(n) else LOW_OR_CRITICAL


@dataclass(frozen=True)
class PseudoLikelihoodFit:
    """Root of the pseudo-likelihood score.

    ``clamped`` is ``'lower'`` or ``'upper'`` when the score does not change
    sign on [0, beta_max] and the estimate sits on that end, else ``None``.
    """

    beta_hat: float
    residual: float
    clamped: str | None
    iterations: int
    mean_local_field: float
    mean_sq_local_field: float
    score_slope: float


def _local_fields(x, graph: CouplingGraph) -> np.ndarray:
    return graph.neighbor_sum(x) + graph.ghost_field()


def pseudo_likelihood_score(beta: float, x, m: np.ndarray) -> float:
    """S̃(β) = (1/n) Σ_i m_i (x_i - tanh(β m_i)) under the zero-field working model."""
    return float(np.mean(m * (x - np.tanh(beta * m))))


def fit_beta_pseudolikelihood(x, graph: CouplingGraph, beta_max: float = BETA_MAX,
                              pinned=None) -> PseudoLikelihoodFit:
    """Solve S̃(β) = 0 on [0, beta_max].

    m_i = Σ_j Q_ij x_j, including the ghost spin under the plus boundary.
    S̃ is nonincreasing in β, so the root is unique when the endpoint values
    differ in sign; otherwise the nearer endpoint is returned and flagged.
    ``pinned`` sites are set to +1 and dropped from the score sum (they act
    as boundary spins for their neighbours).
    """
    x = np.asarray(x, dtype=np.float64).copy()
    keep = np.ones(len(x), dtype=bool)
    if pinned is not None:
        pinned = np.asarray(pinned, dtype=np.int64)
        x[pinned] = 1.0
        keep[pinned] = False
    m_all = _local_fields(x, graph)
    m, xs = m_all[keep], x[keep]
    msq = float(np.mean(m * m))
    if msq == 0:
        raise EstimationError("all local fields are zero")

    def score(b):
        return pseudo_likelihood_score(b, xs, m)

    def slope(b):
        return float(-np.mean(m * m / np.cosh(b * m) ** 2))

    lo, hi = score(0.0), score(beta_max)
    if lo <= 0:
        return PseudoLikelihoodFit(0.0, abs(lo), "lower" if lo < 0 else None, 0, float(m.mean()), msq, slope(0.0))
    if hi >= 0:
        return PseudoLikelihoodFit(beta_max, abs(hi), "upper" if hi > 0 else None, 0,
                                   float(m.mean()), msq, slope(beta_max))
    root, res = optimize.brentq(score, 0.0, beta_max, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                                maxiter=500, full_output=True)
    return PseudoLikelihoodFit(float(root), abs(score(root)), None, res.iterations,
                               float(m.mean()), msq, slope(root))


# ----------------------------------------------------------------------------
# χ table for the lattice pipeline


@dataclass(frozen=True, eq=False)
class ChiTable:
    """χ̂ and per-site null means on a β grid, linearly interpolated."""

    betas: np.ndarray
    chis: np.ndarray
    means: np.ndarray
    bc: str
    s: int

    def chi(self, beta: float) -> float:
        return float(np.interp(beta, self.betas, self.chis))

    def centering(self, beta: float) -> np.ndarray:
        j = np.searchsorted(self.betas, beta)
        if j <= 0:
            return self.means[0]
        if j >= len(self.betas):
            return self.means[-1]
        b0, b1 = self.betas[j - 1], self.betas[j]
        w = (beta - b0) / (b1 - b0)
        return (1 - w) * self.means[j - 1] + w * self.means[j]


def default_chi_grid(bc: str, beta_c: float = BETA_C_2D, points: int = 20, gap: float = 0.04,
                     beta_top: float = 1.0) -> np.ndarray:
    """20 β values avoiding a window of half-width ``gap`` around β_c.

    Free boundary: all below β_c.  Plus boundary: half below, half above.
    """
    if bc == "free":
        return np.linspace(0.0, beta_c - gap, points)
    half = points // 2
    return np.concatenate([np.linspace(0.0, beta_c - gap, half),
                           np.linspace(beta_c + gap, beta_top, points - half)])


def build_chi_table(graph: CouplingGraph, s: int, seed: int, betas=None, replications: int = 500,
                    chain: ChainConfig | None = None) -> ChiTable:
    """Estimate χ̂ (centered interior block) and per-site means on a β grid.

    Grid point k uses stream (seed, k).
    """
    if graph.kind != "lattice":
        raise ValueError("chi tables are for lattice graphs")
    side, dim = int(graph.params["side"]), int(graph.params["dim"])
    betas = default_chi_grid(graph.boundary) if betas is None else np.asarray(betas, dtype=float)
    sites = block_sites(side, dim, s, margin=interior_margin(side))
    k = integer_root_ceil(s, dim)
    chis, means = [], []
    for j, b in enumerate(betas):
        X = sample_null(ModelSpec(graph, float(b)), replications, replication_rng(seed, j), chain)
        z = X[:, sites].sum(axis=1, dtype=np.int64) / math.sqrt(k ** dim)
        chis.append(jackknife_variance(z)[0])
        means.append(X.mean(axis=0))
    return ChiTable(np.asarray(betas), np.asarray(chis), np.asarray(means), graph.boundary, k ** dim)


# ----------------------------------------------------------------------------


def adaptive_test(x, cls: ScanClass, delta: float, rng: np.random.Generator | None,
                  family: str = "mean_field", *, graph: CouplingGraph | None = None,
                  chi_table: ChiTable | None = None, force_branch: str | None = None,
                  beta_c: float = BETA_C_2D, critical_guard: float = 0.02,
                  pinned=None) -> TestDecision:
    """Scan test with β estimated from the data.

    mean_field: ``regime_classifier`` (or ``force_branch``) picks the branch.
    On ``low_or_critical_beta`` this is exactly :func:`high_temp_scan_test`.
    On ``high_beta_dependence`` β̂ is fitted on ``graph`` (default: the
    complete graph) and, if β̂ > 1, :func:`low_temp_randomized_scan_test` runs
    at β̂ with ``rng``; if β̂ ≤ 1 m(β̂) = 0 and the β-free test is used.

    lattice: β̂ on the lattice ``graph``; χ(β̂) and, for the plus boundary,
    the centering come from ``chi_table``.  β̂ within ``critical_guard`` of
    ``beta_c`` is flagged in ``info['near_critical']``.
    """
    x = np.asarray(x)
    n = x.shape[-1]
    if family == "mean_field":
        regime = force_branch or regime_classifier(x)
        if regime == LOW_OR_CRITICAL:
            d = high_temp_scan_test(x, cls, delta)
            return _tag(d, regime=regime)
        if regime != HIGH_DEPENDENCE:
            raise ValueError(f"unknown branch {regime!r}")
        g = graph if graph is not None else build_complete(n)
        fit = fit_beta_pseudolikelihood(x, g)
        if fit.beta_hat > 1:
            d = low_temp_randomized_scan_test(x, cls, fit.beta_hat, delta, rng)
        else:
            d = high_temp_scan_test(x, cls, delta)
        return _tag(d, regime=regime, beta_hat=fit.beta_hat, clamped=fit.clamped)
    if family == "lattice":
        if graph is None or graph.kind != "lattice":
            raise ValueError("the lattice pipeline needs the lattice graph")
        if chi_table is None:
            raise ValueError("the lattice pipeline needs a chi table")
        fit = fit_beta_pseudolikelihood(x, graph, pinned=pinned)
        chi = chi_table.chi(fit.beta_hat)
        centering = chi_table.centering(fit.beta_hat) if graph.has_ghost else None
        d = lattice_scan_test(x, cls, chi, delta, centering)
        return _tag(d, beta_hat=fit.beta_hat, clamped=fit.clamped,
                    near_critical=abs(fit.beta_hat - beta_c) < critical_guard)
    raise ValueError(f"unknown family {family!r}")


def _tag(d: TestDecision, **info) -> TestDecision:
    merged = dict(d.info)
    merged.update(info)
    return TestDecision(f"adaptive[{d.test_name}]", d.reject, d.statistic, d.threshold,
                        d.branch, d.w, merged, d.components)
