"""Invariant suite checked against the exact oracle on random small models.

Each check returns the largest violation found (0 or negative means the
inequality held with room to spare).  :func:`run_oracle_suite` draws the
instances and collects one :class:`CheckResult` per property.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exact import auxiliary_ratio_integral, exact_ratio, exact_summary
from .model import (ModelSpec, SignalSpec, build_complete, build_erdos_renyi, build_lattice,
                    build_random_regular, local_fields)

__all__ = [
    "CheckResult",
    "random_small_model",
    "gks_violation",
    "ghs_violation",
    "mean_bound_violation",
    "mean_identity_error",
    "run_oracle_suite",
]

TOL = 1e-12


@dataclass(frozen=True)
class CheckResult:
    name: str
    instances: int
    worst: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.worst <= self.tolerance


def random_small_model(rng: np.random.Generator, max_n: int = 8, beta_max: float = 2.0) -> ModelSpec:
    """A ferromagnetic model with n ≤ ``max_n`` sites and a random nonnegative field."""
    kind = rng.integers(4)
    if kind == 0:
        g = build_complete(int(rng.integers(2, max_n + 1)))
    elif kind == 1:
        g = build_erdos_renyi(int(rng.integers(3, max_n + 1)), float(rng.uniform(0.2, 0.9)), rng)
    elif kind == 2:
        n = int(rng.integers(4, max_n + 1))
        n -= n % 2
        g = build_random_regular(n, int(rng.integers(1, min(3, n - 1) + 1)), rng)
    else:
        dim = 1 if max_n < 4 else int(rng.integers(1, 3))
        side = int(rng.integers(2, max(2, int(max_n ** (1.0 / dim))) + 1))
        while side ** dim > max_n:
            side -= 1
        g = build_lattice(max(side, 2), dim, "plus" if rng.random() < 0.5 else "free")
    mu = rng.uniform(0, 1.5, g.n) * (rng.random(g.n) < 0.6)
    return ModelSpec(g, float(rng.uniform(0, beta_max)), SignalSpec.from_vector(mu))


def gks_violation(model: ModelSpec) -> float:
    """max over -E X_i and -Cov(X_i, X_j); should be ≤ 0 when μ ≥ 0."""
    s = exact_summary(model)
    return float(max((-s.means).max(), (-s.covariances).max()))


def ghs_violation(model: ModelSpec, rng: np.random.Generator) -> float:
    """max of Cov_{μ1} - Cov_{μ2} for μ1 = μ ≥ μ2 = U·μ coordinate-wise."""
    mu1 = model.mu
    mu2 = mu1 * rng.random(model.n)
    c1 = exact_summary(model).covariances
    c2 = exact_summary(model.with_field(SignalSpec.from_vector(mu2))).covariances
    return float((c1 - c2).max())


def mean_bound_violation(model: ModelSpec) -> float:
    """max of (1 - tanh(β‖Q‖)) tanh(μ_i) - E X_i."""
    s = exact_summary(model)
    c = 1.0 - math.tanh(model.beta * model.graph.inf_norm())
    return float((c * np.tanh(model.mu) - s.means).max())


def mean_identity_error(model: ModelSpec) -> float:
    """max |E X_i - E tanh(local field_i)| over sites."""
    s = exact_summary(model, keep_pmf=True)
    n = model.n
    b = np.arange(1 << n)
    x = (2 * ((b[:, None] >> np.arange(n)) & 1) - 1).astype(float)
    h = local_fields(model, x)
    return float(np.abs(s.pmf @ np.tanh(h) - s.means).max())


def run_oracle_suite(seed: int, max_n: int = 10, instances: int = 200) -> list[CheckResult]:
    """GKS, GHS, mean lower bound, mean identity and pmf normalization on random models,
    plus the auxiliary-integral cross-check at n = 12 when ``max_n`` allows."""
    rng = np.random.default_rng(seed)
    worst = {"gks": -np.inf, "ghs": -np.inf, "mean_bound": -np.inf, "mean_identity": 0.0, "pmf_sum": 0.0,
             "cov_diagonal": 0.0}
    for _ in range(instances):
        m = random_small_model(rng, max_n)
        worst["gks"] = max(worst["gks"], gks_violation(m))
        worst["ghs"] = max(worst["ghs"], ghs_violation(m, rng))
        worst["mean_bound"] = max(worst["mean_bound"], mean_bound_violation(m))
        worst["mean_identity"] = max(worst["mean_identity"], mean_identity_error(m))
        s = exact_summary(m, keep_pmf=True)
        worst["pmf_sum"] = max(worst["pmf_sum"], abs(s.pmf.sum() - 1.0))
        diag_err = float(np.abs(np.diag(s.covariances) - (1 - s.means ** 2)).max())
        worst["cov_diagonal"] = max(worst["cov_diagonal"], diag_err)
    tol = {"gks": TOL, "ghs": TOL, "mean_bound": TOL, "mean_identity": 1e-10, "pmf_sum": TOL,
           "cov_diagonal": 1e-10}
    out = [CheckResult(k, instances, float(v), tol[k]) for k, v in worst.items()]
    g = build_complete(12)
    num = ModelSpec(g, 0.5, SignalSpec.uniform(12, range(3), 0.4))
    err = abs(auxiliary_ratio_integral(12, 0.5, 3, 0.4) - exact_ratio(num, num.null()))
    out.append(CheckResult("ratio_integral", 1, err, 1e-6))
    return out
