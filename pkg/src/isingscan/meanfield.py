"""Curie–Weiss fixed point, sharp detection constants and scan cutoffs."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "HIGH",
    "LOW",
    "MeanFieldSolution",
    "CutoffSpec",
    "InfeasibleSignalError",
    "solve_m",
    "sharp_constant",
    "scan_cutoff",
    "low_temp_cutoff",
    "signal_strength_for_constant",
    "figure1_table",
]

HIGH = "high_or_critical"
LOW = "low"


class InfeasibleSignalError(ValueError):
    """The requested constant needs tanh(A) >= 1."""


@dataclass(frozen=True)
class MeanFieldSolution:
    beta: float
    m: float
    residual: float


def solve_m(beta: float) -> MeanFieldSolution:
    """Largest root of m = tanh(βm) on [0, 1], by bisection.

    For β ≤ 1 the only root is 0.  For β > 1 the bracket [0, 1] is halved
    until it stops shrinking in floating point; g(m) = tanh(βm) - m is
    positive below the root and negative above it.
    """
    if not beta >= 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    if beta <= 1:
        return MeanFieldSolution(float(beta), 0.0, 0.0)
    lo, hi = 0.0, 1.0
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if math.tanh(beta * mid) > mid:
            lo = mid
        else:
            hi = mid
    # pick the endpoint with the smaller residual
    m = min((lo, hi), key=lambda v: abs(v - math.tanh(beta * v)))
    if m == 0.0:
        # β so close to 1 that the root underflows the bracket
        m = lo
    return MeanFieldSolution(float(beta), m, abs(m - math.tanh(beta * m)))


def sharp_constant(beta: float) -> float:
    """√2 for β ≤ 1 and √2·cosh(β m(β)) above criticality."""
    if beta <= 1:
        return math.sqrt(2.0)
    m = solve_m(beta).m
    return math.sqrt(2.0) * math.cosh(beta * m)


@dataclass(frozen=True)
class CutoffSpec:
    """Inputs of the scan cutoff.

    ``log_class_size`` is the log of the number of scanned candidates.  Zero
    (a single candidate) is allowed and gives a zero offset.
    """

    delta: float
    log_class_size: float
    s: int
    regime: str = HIGH

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be > 0, got {self.delta}")
        if not self.log_class_size >= 0:
            raise ValueError("log_class_size must be >= 0")
        if self.s < 1:
            raise ValueError("s must be >= 1")
        if self.regime not in (HIGH, LOW):
            raise ValueError(f"unknown regime {self.regime!r}")


def low_temp_cutoff(delta: float, log_class_size: float, s: int, m: float) -> tuple[float, float]:
    """(shift m√s, offset √(2(1+δ)(1-m²) log|class|)) for a given magnetization m."""
    shift = m * math.sqrt(s)
    offset = math.sqrt(2.0 * (1.0 + delta) * (1.0 - m * m) * log_class_size)
    return shift, offset


def scan_cutoff(spec: CutoffSpec, beta: float):
    """Threshold on the Z_max scale.

    High/critical regime: a float √(2(1+δ) log|class|).  Low regime: the pair
    (shift, offset) of :func:`low_temp_cutoff` with m = m(β); the randomized
    test rejects when Z_max exceeds ±shift + offset.
    """
    if spec.regime == HIGH:
        return math.sqrt(2.0 * (1.0 + spec.delta) * spec.log_class_size)
    if beta <= 1:
        raise ValueError("the low-temperature cutoff needs beta > 1")
    return low_temp_cutoff(spec.delta, spec.log_class_size, spec.s, solve_m(beta).m)


def signal_strength_for_constant(c: float, s: int, log_class_size: float, beta: float,
                                 family: str = "mean_field", chi: float | None = None) -> float:
    """Signal strength A placing √s·tanh(A)/√log|class| at ``c`` times the sharp constant.

    ``family='mean_field'`` uses :func:`sharp_constant`; ``family='lattice'``
    uses √(2χ) and needs ``chi``.  ``c = 1`` sits exactly on the threshold.
    """
    if c < 0:
        raise ValueError("c must be >= 0")
    if family == "mean_field":
        const = sharp_constant(beta)
    elif family == "lattice":
        if chi is None or not chi > 0:
            raise ValueError("lattice family needs chi > 0")
        const = math.sqrt(2.0 * chi)
    else:
        raise ValueError(f"unknown family {family!r}")
    arg = c * const * math.sqrt(log_class_size / s)
    if arg >= 1:
        raise InfeasibleSignalError(f"tanh(A) would be {arg:.4g} >= 1 (c={c}, s={s}, beta={beta})")
    return math.atanh(arg)


def figure1_table(beta_max: float, steps: int) -> np.ndarray:
    """Rows (β, m(β), sharp constant) on ``steps`` equally spaced β in (0, beta_max]."""
    if steps < 1 or not beta_max > 0:
        raise ValueError("need steps >= 1 and beta_max > 0")
    betas = beta_max * np.arange(1, steps + 1) / steps
    return np.array([(b, solve_m(b).m, sharp_constant(b)) for b in betas])
