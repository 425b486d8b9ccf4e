"""Scan statistics and the test decision rules built on them.

Every statistic is Z_S = Σ_{i∈S} (x_i - c_i)/√s for a centering vector c
(zero unless a plus-boundary lattice is being tested).  Cube families use a
d-dimensional summed-area table so all cube sums cost O(n + |class|) per
configuration; explicit families use a sparse incidence product.

Decisions use strict inequalities: equality with the threshold accepts.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .classes import ScanClass
from .meanfield import low_temp_cutoff, solve_m
from .model import ModelSpec
from .samplers import ChainConfig, sample_null

__all__ = [
    "ScanStatistics",
    "TestDecision",
    "window_sums",
    "candidate_sums",
    "scan_z",
    "scan_statistics",
    "high_temp_scan_test",
    "low_temp_randomized_scan_test",
    "lattice_scan_test",
    "centered_sum_test",
    "centered_sum_multiplier",
    "bonferroni_combine",
    "estimate_null_means",
    "write_decisions_csv",
    "DECISION_FIELDS",
]

DECISION_FIELDS = ("test_name", "statistic", "threshold", "branch", "reject")


@dataclass(frozen=True)
class ScanStatistics:
    per_candidate: np.ndarray
    z_max: float
    argmax: int
    centering: np.ndarray


@dataclass(frozen=True)
class TestDecision:
    """Outcome of one test on one configuration.

    ``reject`` is ``statistic > threshold``.  ``branch`` records the sign of
    the auxiliary draw for the randomized test (``positive``/``negative``) and
    is ``none`` otherwise; ``w`` is that draw.  ``components`` holds the inputs
    of a combined decision.
    """

    test_name: str
    reject: bool
    statistic: float
    threshold: float
    branch: str = "none"
    w: float | None = None
    info: dict = field(default_factory=dict)
    components: tuple = ()

    def to_row(self) -> tuple:
        return (self.test_name, repr(float(self.statistic)), repr(float(self.threshold)),
                self.branch, int(self.reject))


def write_decisions_csv(path, decisions) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DECISION_FIELDS)
        for d in decisions:
            w.writerow(d.to_row())


# ----------------------------------------------------------------------------
# statistics


def window_sums(X: np.ndarray, side: int, dim: int, k: int) -> np.ndarray:
    """Sums over every k-cube of a ``side``^dim box, for each row of ``X``.

    Returns shape (R, (side-k+1)^dim) in row-major anchor order.  Integer input
    gives exact integer sums.
    """
    X = np.atleast_2d(X)
    R = X.shape[0]
    acc = np.int64 if np.issubdtype(X.dtype, np.integer) else np.float64
    A = X.reshape((R,) + (side,) * dim).astype(acc)
    for ax in range(1, dim + 1):
        pad = [(0, 0)] * (dim + 1)
        pad[ax] = (1, 0)
        c = np.cumsum(np.pad(A, pad), axis=ax)
        hi = [slice(None)] * (dim + 1)
        lo = [slice(None)] * (dim + 1)
        hi[ax] = slice(k, None)
        lo[ax] = slice(0, -k)
        A = c[tuple(hi)] - c[tuple(lo)]
    return A.reshape(R, -1)


def candidate_sums(X: np.ndarray, cls: ScanClass) -> np.ndarray:
    """Σ_{i∈S} X_i for every candidate S and every row of ``X``; shape (R, K)."""
    X = np.atleast_2d(X)
    if X.shape[1] != cls.n:
        raise ValueError(f"configuration has {X.shape[1]} sites, class expects {cls.n}")
    if cls.is_cube_family:
        full = window_sums(X, cls.side, cls.dim, cls.cube)
        R = X.shape[0]
        full = full.reshape((R,) + (cls.side - cls.cube + 1,) * cls.dim)
        sel = full[(slice(None),) + np.ix_(*cls.anchors)]
        return sel.reshape(R, -1)
    out = cls.incidence @ X.T.astype(np.float64)
    out = np.asarray(out).T
    if np.issubdtype(X.dtype, np.integer):
        out = np.rint(out).astype(np.int64)
    return out


def scan_z(X: np.ndarray, cls: ScanClass, centering=None) -> np.ndarray:
    """Z_S for every row and candidate, shape (R, K)."""
    sums = candidate_sums(X, cls).astype(np.float64)
    if centering is not None:
        c = np.asarray(centering, dtype=np.float64)
        if np.any(c):
            sums = sums - candidate_sums(c[None, :], cls)
    return sums / math.sqrt(cls.s)


def scan_statistics(x, cls: ScanClass, centering=None) -> ScanStatistics:
    """All Z_S for one configuration; ties in the maximum go to the lowest index."""
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError("scan_statistics takes a single configuration")
    z = scan_z(x[None, :], cls, centering)[0]
    j = int(np.argmax(z))
    c = np.zeros(cls.n) if centering is None else np.asarray(centering, dtype=float)
    return ScanStatistics(z, float(z[j]), j, c)


def _z_max(x, cls, centering, z_max):
    if z_max is not None:
        return float(z_max)
    return scan_statistics(x, cls, centering).z_max


# ----------------------------------------------------------------------------
# decision rules


def high_temp_scan_test(x, cls: ScanClass, delta: float, centering=None,
                        z_max: float | None = None) -> TestDecision:
    """Reject when Z_max > √(2(1+δ) log|class|).  Needs no knowledge of β.

    ``z_max`` may be supplied when the statistic was already computed.
    """
    if not delta > 0:
        raise ValueError("delta must be > 0")
    t = math.sqrt(2.0 * (1.0 + delta) * cls.log_size)
    z = _z_max(x, cls, centering, z_max)
    return TestDecision("high_temp_scan", z > t, z, t)


def low_temp_randomized_scan_test(x, cls: ScanClass, beta: float, delta: float,
                                  rng: np.random.Generator | None = None, *, m: float | None = None,
                                  w: float | None = None, z_max: float | None = None) -> TestDecision:
    """Randomized scan test for β > 1.

    Draw W ~ N(X̄, 1/(nβ)).  When W > 0 reject iff Z_max > m√s + t, otherwise
    reject iff Z_max > -m√s + t, with t = √(2(1+δ)(1-m²) log|class|) and
    m = m(β).  ``m`` overrides the magnetization (then any β > 0 is accepted)
    and ``w`` overrides the draw.
    """
    if m is None:
        if beta <= 1:
            raise ValueError("the randomized low-temperature test needs beta > 1")
        m = solve_m(beta).m
    if not delta > 0:
        raise ValueError("delta must be > 0")
    if w is None:
        if rng is None:
            raise ValueError("an rng is required unless w is given")
        x = np.asarray(x)
        n = x.shape[-1]
        w = float(x.mean() + rng.standard_normal() / math.sqrt(n * beta))
    shift, offset = low_temp_cutoff(delta, cls.log_size, cls.s, m)
    positive = w > 0
    t = (shift if positive else -shift) + offset
    z = _z_max(x, cls, None, z_max)
    return TestDecision("low_temp_randomized_scan", z > t, z, t,
                        branch="positive" if positive else "negative", w=float(w), info={"m": m})


def lattice_scan_test(x, cls: ScanClass, chi: float, delta: float, centering=None,
                      z_max: float | None = None) -> TestDecision:
    """Reject when the centered Z_max exceeds √(2(1+δ) χ log|class|)."""
    if not chi > 0:
        raise ValueError(f"chi must be > 0, got {chi}")
    if not delta > 0:
        raise ValueError("delta must be > 0")
    t = math.sqrt(2.0 * (1.0 + delta) * chi * cls.log_size)
    z = _z_max(x, cls, centering, z_max)
    return TestDecision("lattice_scan", z > t, z, t, info={"chi": chi})


def centered_sum_multiplier(alpha: float, beta: float) -> float:
    """Multiplier giving one-sided level ``alpha`` in the Gaussian limit.

    Conditionally on the sign of X̄, √n(X̄ - m) is asymptotically normal with
    variance (1-m²)/(1 - β(1-m²)); the threshold is stated in units of
    √(n(1-m²)), hence the extra factor.
    """
    m = solve_m(beta).m
    v = 1.0 - beta * (1.0 - m * m)
    if v <= 0:
        raise ValueError("the Gaussian limit degenerates at beta = 1")
    return float(stats.norm.isf(alpha)) / math.sqrt(v)


def centered_sum_test(x, beta: float, threshold_multiplier: float = 3.0) -> TestDecision:
    """Reject when Σx_i - n·m(β)·sign(X̄) > multiplier·√(n(1-m²)).

    sign(0) is taken as +1.
    """
    x = np.asarray(x)
    n = x.shape[-1]
    m = solve_m(beta).m
    total = float(x.sum())
    sgn = 1.0 if total >= 0 else -1.0
    stat = total - n * m * sgn
    t = threshold_multiplier * math.sqrt(n * (1.0 - m * m))
    return TestDecision("centered_sum", stat > t, stat, t, info={"m": m})


def bonferroni_combine(d1: TestDecision, d2: TestDecision) -> TestDecision:
    """Reject when either input rejects.

    The combined statistic is the larger margin (statistic - threshold) and
    the threshold is 0, so ``reject == statistic > threshold`` still holds.
    """
    margin = max(d1.statistic - d1.threshold, d2.statistic - d2.threshold)
    reject = d1.reject or d2.reject
    return TestDecision(f"bonferroni({d1.test_name},{d2.test_name})", reject, margin, 0.0,
                        components=(d1, d2))


# ----------------------------------------------------------------------------
# plus-boundary centering

_NULL_MEANS: dict = {}
_CENTERING_STREAM = 1 << 30


def estimate_null_means(model: ModelSpec, count: int, seed: int,
                        chain: ChainConfig | None = None) -> np.ndarray:
    """Per-site null means from ``count`` independent null draws.

    Uses its own stream derived from ``seed`` so it never overlaps with the
    replication streams.  Results are cached per (graph, β, count, seed, chain).
    """
    chain = chain or ChainConfig()
    key = (model.graph.key, float(model.beta), count, seed, chain)
    if key not in _NULL_MEANS:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_CENTERING_STREAM,)))
        X = sample_null(model.null(), count, rng, chain)
        means = X.mean(axis=0)
        means.setflags(write=False)
        _NULL_MEANS[key] = means
    return _NULL_MEANS[key]
