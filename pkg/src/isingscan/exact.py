"""Brute-force ground truth for small Ising systems.

Configurations are enumerated in binary order: state ``b`` has
``x_i = 2*((b >> i) & 1) - 1``.  All sums are carried out in log-space with a
streaming log-sum-exp so large β·n does not overflow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy.special import logsumexp

from .model import ModelSpec

__all__ = [
    "DEFAULT_MAX_N",
    "ExactSummary",
    "OracleSizeError",
    "NumericalError",
    "enumerate_states",
    "exact_log_weights",
    "exact_summary",
    "exact_pmf",
    "exact_magnetization_pmf",
    "exact_tail",
    "exact_ratio",
    "log_cosh",
    "cw_log_density",
    "cw_density_support",
    "auxiliary_ratio_integral",
    "cw_disjoint_scan_rejection",
]

DEFAULT_MAX_N = 22
_CHUNK = 1 << 16


class OracleSizeError(ValueError):
    """System too large to enumerate."""


class NumericalError(RuntimeError):
    """Quadrature or tabulation failed to reach the requested accuracy."""


def log_cosh(z):
    """Overflow-free log(cosh(z))."""
    z = np.abs(z)
    return z + np.log1p(np.exp(-2.0 * z)) - math.log(2.0)


def _check_size(n: int, max_n: int):
    if n > max_n:
        raise OracleSizeError(f"n={n} exceeds the enumeration cap of {max_n}")


def enumerate_states(n: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """±1 configurations for state indices [start, stop), shape (k, n), int8."""
    stop = 1 << n if stop is None else stop
    b = np.arange(start, stop, dtype=np.int64)[:, None]
    bits = (b >> np.arange(n, dtype=np.int64)) & 1
    return (2 * bits - 1).astype(np.int8)


def _chunks(n: int):
    total = 1 << n
    for lo in range(0, total, _CHUNK):
        yield lo, min(lo + _CHUNK, total)


def _chunk_log_weights(model: ModelSpec, x: np.ndarray) -> np.ndarray:
    xf = x.astype(float)
    pair = 0.5 * model.beta * np.einsum("ij,ij->i", xf, model.graph.neighbor_sum(xf))
    return pair + xf @ model.effective_field()


def exact_log_weights(model: ModelSpec, max_n: int = DEFAULT_MAX_N) -> np.ndarray:
    """Unnormalised log-probabilities of all 2^n states."""
    _check_size(model.n, max_n)
    return np.concatenate(
        [_chunk_log_weights(model, enumerate_states(model.n, lo, hi)) for lo, hi in _chunks(model.n)]
    )


def _log_partition(model: ModelSpec, max_n: int) -> float:
    _check_size(model.n, max_n)
    acc = -np.inf
    for lo, hi in _chunks(model.n):
        acc = np.logaddexp(acc, logsumexp(_chunk_log_weights(model, enumerate_states(model.n, lo, hi))))
    return float(acc)


@dataclass(frozen=True)
class ExactSummary:
    log_partition: float
    means: np.ndarray
    covariances: np.ndarray
    pmf: np.ndarray | None = None


def exact_summary(model: ModelSpec, max_n: int = DEFAULT_MAX_N, keep_pmf: bool = False) -> ExactSummary:
    """log Z, per-site means and the covariance matrix by full enumeration."""
    n = model.n
    log_z = _log_partition(model, max_n)
    first = np.zeros(n)
    second = np.zeros((n, n))
    pmf = np.empty(1 << n) if keep_pmf else None
    for lo, hi in _chunks(n):
        x = enumerate_states(n, lo, hi).astype(float)
        p = np.exp(_chunk_log_weights(model, x) - log_z)
        first += p @ x
        second += (x * p[:, None]).T @ x
        if keep_pmf:
            pmf[lo:hi] = p
    cov = second - np.outer(first, first)
    cov = 0.5 * (cov + cov.T)
    return ExactSummary(log_z, first, cov, pmf)


def exact_pmf(model: ModelSpec, max_n: int = DEFAULT_MAX_N) -> np.ndarray:
    lw = exact_log_weights(model, max_n)
    return np.exp(lw - logsumexp(lw))


def exact_magnetization_pmf(model: ModelSpec, max_n: int = DEFAULT_MAX_N) -> np.ndarray:
    """P(Σ_i x_i = 2k - n) for k = 0..n (entry k = number of plus spins)."""
    n = model.n
    log_z = _log_partition(model, max_n)
    out = np.zeros(n + 1)
    for lo, hi in _chunks(n):
        x = enumerate_states(n, lo, hi)
        p = np.exp(_chunk_log_weights(model, x) - log_z)
        k = (x.astype(np.int64).sum(axis=1) + n) // 2
        out += np.bincount(k, weights=p, minlength=n + 1)
    return out


def exact_tail(model: ModelSpec, support, t: float, max_n: int = DEFAULT_MAX_N) -> float:
    """P(Z_S > t) with Z_S = Σ_{i∈S} x_i / √|S|, by enumeration."""
    support = np.asarray(support, dtype=np.int64)
    s = len(support)
    if s == 0:
        raise ValueError("support must be nonempty")
    n = model.n
    log_z = _log_partition(model, max_n)
    acc = 0.0
    for lo, hi in _chunks(n):
        x = enumerate_states(n, lo, hi)
        z = x[:, support].astype(float).sum(axis=1) / math.sqrt(s)
        hit = z > t
        if hit.any():
            acc += float(np.exp(_chunk_log_weights(model, x[hit]) - log_z).sum())
    return min(acc, 1.0)


def exact_ratio(model_with_field: ModelSpec, model_null: ModelSpec, max_n: int = DEFAULT_MAX_N) -> float:
    """Z(β, Q, μ) / Z(β, Q, 0) by enumeration."""
    if model_with_field.graph is not model_null.graph and model_with_field.graph.key != model_null.graph.key:
        raise ValueError("models must share the same graph")
    if model_with_field.beta != model_null.beta:
        raise ValueError("models must share the same beta")
    return math.exp(_log_partition(model_with_field, max_n) - _log_partition(model_null, max_n))


# ----------------------------------------------------------------------------
# Curie–Weiss auxiliary variable
#
# With W | X ~ N(X̄, 1/(nβ)) the spins become conditionally independent given W
# and W has density ∝ exp(-n f(w)),  f(w) = βw²/2 - (1/n) Σ log cosh(βw + μ_i).


def cw_log_density(w, n: int, beta: float, mu) -> np.ndarray:
    """-n·f(w) up to an additive constant; ``mu`` is a length-n field vector."""
    w = np.asarray(w, dtype=float)
    mu = np.asarray(mu, dtype=float)
    vals, counts = np.unique(mu, return_counts=True)
    lc = sum(c * log_cosh(beta * w + v) for v, c in zip(vals, counts))
    return -0.5 * n * beta * w**2 + lc


def cw_density_support(n: int, beta: float, mu, drop: float = 50.0):
    """Modes and an interval outside which the log-density is ``drop`` below its max.

    Every stationary point of f lies in [-1, 1] (βw = (β/n) Σ tanh(...)), so
    the global maximum is searched there and the interval is widened outward
    until the density has decayed by e^{-drop} (tail mass far below 1e-14).
    """
    if beta <= 0:
        raise ValueError("the auxiliary density needs beta > 0")
    g = lambda w: cw_log_density(w, n, beta, mu)  # noqa: E731
    grid = np.linspace(-1.0, 1.0, 4001)
    vals = g(grid)
    modes = []
    # local maxima of the coarse grid, refined by bounded scalar minimisation
    interior = np.flatnonzero((vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:])) + 1
    cand = list(interior) + [int(np.argmax(vals))]
    for k in sorted(set(cand)):
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
        res = optimize.minimize_scalar(lambda w: -g(w), bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-13})
        modes.append(float(res.x))
    modes = sorted(set(np.round(modes, 12)))
    gmax = max(float(g(m)) for m in modes)
    step = 0.5
    lo = min(modes) - 1e-3
    while g(lo) > gmax - drop:
        lo -= step
        step *= 2
    step = 0.5
    hi = max(modes) + 1e-3
    while g(hi) > gmax - drop:
        hi += step
        step *= 2
    return np.array(modes), float(lo), float(hi), gmax


def _log_integral(n, beta, mu, rtol):
    modes, lo, hi, gmax = cw_density_support(n, beta, mu)
    f = lambda w: math.exp(float(cw_log_density(w, n, beta, mu)) - gmax)  # noqa: E731
    # split at the modes so quad sees each peak
    width = 1.0 / math.sqrt(n * beta)
    pts = sorted({lo, hi, *[min(max(m, lo), hi) for m in modes],
                  *[min(max(m + k * width, lo), hi) for m in modes for k in (-8, -3, 3, 8)]})
    total, err_total = 0.0, 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b <= a:
            continue
        val, err, info, *msg = integrate.quad(f, a, b, epsabs=0.0, epsrel=rtol, limit=400, full_output=1)
        # quad appends a message only when it hit a problem
        if msg and err > 1e3 * rtol * max(abs(val), 1e-300):
            raise NumericalError(
                f"quadrature on [{a:.6g}, {b:.6g}] did not converge: value={val:.6g}, "
                f"error estimate={err:.3g}, evaluations={info['neval']}, message={msg[0]!r}"
            )
        total += val
        err_total += err
    if not total > 0:
        raise NumericalError(f"nonpositive integral {total} on [{lo}, {hi}]")
    return math.log(total) + gmax, err_total / total


def auxiliary_ratio_integral(n: int, beta: float, s: int, A: float, rtol: float = 1e-10) -> float:
    """Z(β, Q_CW, μ_S(A)) / Z(β, Q_CW, 0) as a one-dimensional integral.

    No enumeration is involved, so any ``n`` works.  ``beta = 0`` returns the
    independent-spin value cosh(A)^s.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if not 0 <= s <= n:
        raise ValueError("need 0 <= s <= n")
    if A == 0 or s == 0:
        return 1.0
    if beta == 0:
        return math.cosh(A) ** s
    mu = np.zeros(n)
    mu[:s] = A
    log_num, _ = _log_integral(n, beta, mu, rtol)
    log_den, _ = _log_integral(n, beta, np.zeros(n), rtol)
    return math.exp(log_num - log_den)


def cw_disjoint_scan_rejection(
    n: int, beta: float, s: int, count: int, threshold: float, signal_A: float = 0.0,
    shift_by_sign: float = 0.0, rtol: float = 1e-10,
) -> float:
    """P(max_S Z_S > threshold) for ``count`` disjoint blocks of size ``s`` in Curie–Weiss.

    Conditionally on the auxiliary variable W the blocks are independent
    binomials, so the scan probability reduces to a 1-d integral.  The first
    block optionally carries a uniform field ``signal_A``.  With
    ``shift_by_sign = m`` the threshold becomes ``threshold + m√s`` when W > 0
    and ``threshold - m√s`` otherwise (the randomized low-temperature rule);
    here W is the decoupling variable, whose law matches N(X̄, 1/(nβ)).
    """
    from scipy.stats import binom

    if count * s > n:
        raise ValueError("blocks do not fit")
    mu = np.zeros(n)
    mu[:s] = signal_A
    modes, lo, hi, gmax = cw_density_support(n, beta, mu)
    k = np.arange(s + 1)
    z = (2 * k - s) / math.sqrt(s)

    def accept_prob(w, a):
        p = 0.5 * (1 + math.tanh(beta * w + a))
        thr = threshold + (shift_by_sign * math.sqrt(s) if w > 0 else -shift_by_sign * math.sqrt(s))
        return float(binom.pmf(k, s, p)[z <= thr].sum())

    def integrand(w):
        dens = math.exp(float(cw_log_density(w, n, beta, mu)) - gmax)
        acc = accept_prob(w, signal_A) * accept_prob(w, 0.0) ** (count - 1)
        return dens * (1.0 - acc)

    def norm(w):
        return math.exp(float(cw_log_density(w, n, beta, mu)) - gmax)

    pts = sorted({lo, hi, 0.0, *modes})
    num = sum(integrate.quad(integrand, a, b, epsrel=rtol, limit=400)[0] for a, b in zip(pts[:-1], pts[1:]))
    den = sum(integrate.quad(norm, a, b, epsrel=rtol, limit=400)[0] for a, b in zip(pts[:-1], pts[1:]))
    return num / den
