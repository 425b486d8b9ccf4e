"""Samplers for the Ising measure.

* :func:`glauber_sample` - heat-bath single-site dynamics, any graph.
* :func:`curie_weiss_exact_sample` - exact draws on the complete graph through
  the auxiliary variable W (spins are i.i.d. given W).
* :func:`swendsen_wang_sample` - Edwards–Sokal cluster moves on lattices,
  including the plus boundary and nonzero fields.

Every sampler takes an explicit ``numpy.random.Generator``; nothing reads
global random state.  Uniforms are drawn in blocks from the generator and fed
to compiled kernels so results are reproducible bit-for-bit.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .exact import cw_density_support, cw_log_density
from .model import CouplingGraph, ModelSpec

__all__ = [
    "ChainConfig",
    "AuxiliaryDensity",
    "BondConfiguration",
    "SamplerError",
    "replication_rng",
    "initial_states",
    "glauber_sample",
    "glauber_sweeps",
    "curie_weiss_exact_sample",
    "swendsen_wang_sample",
    "swendsen_wang_chains",
    "swendsen_wang_step",
    "fk_ising_bond_sample",
    "sample_null",
    "sample_streams",
    "write_samples_csv",
]

GLAUBER_BURN_IN = 200
SW_BURN_IN = 50
DEFAULT_THINNING = 5


class SamplerError(ValueError):
    """Model not supported by the requested sampler, or tabulation failure."""


@dataclass(frozen=True)
class ChainConfig:
    """Burn-in, thinning and start state for an MCMC run.

    ``burn_in_sweeps=None`` picks the sampler's default (200 Glauber sweeps,
    50 Swendsen–Wang steps).
    """

    burn_in_sweeps: int | None = None
    thinning_sweeps: int = DEFAULT_THINNING
    initial_state: str = "uniform_random"
    random_scan: bool = False

    def __post_init__(self):
        if self.burn_in_sweeps is not None and self.burn_in_sweeps < 0:
            raise ValueError("burn_in_sweeps must be >= 0")
        if self.thinning_sweeps < 1:
            raise ValueError("thinning_sweeps must be >= 1")
        if self.initial_state not in ("all_plus", "all_minus", "uniform_random"):
            raise ValueError(f"unknown initial state {self.initial_state!r}")

    def burn_in(self, default: int) -> int:
        return default if self.burn_in_sweeps is None else self.burn_in_sweeps


def replication_rng(seed: int, index: int = 0) -> np.random.Generator:
    """Independent stream for replication ``index`` of master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def initial_states(n: int, reps: int, how: str, rng: np.random.Generator) -> np.ndarray:
    if how == "all_plus":
        return np.ones((reps, n), dtype=np.int8)
    if how == "all_minus":
        return -np.ones((reps, n), dtype=np.int8)
    return (2 * rng.integers(0, 2, size=(reps, n)) - 1).astype(np.int8)


# ----------------------------------------------------------------------------
# Glauber


@njit(cache=True, nogil=True)
def _glauber_csr(x, indptr, indices, scale, beta, h, order, u):
    n = x.shape[0]
    for t in range(u.shape[0]):
        for k in range(n):
            i = order[t, k]
            acc = 0.0
            for q in range(indptr[i], indptr[i + 1]):
                acc += x[indices[q]]
            f = beta * scale * acc + h[i]
            if u[t, k] < 0.5 * (1.0 + math.tanh(f)):
                x[i] = 1
            else:
                x[i] = -1


@njit(cache=True, nogil=True)
def _glauber_complete(x, scale, beta, h, order, u):
    n = x.shape[0]
    total = 0.0
    for i in range(n):
        total += x[i]
    for t in range(u.shape[0]):
        for k in range(n):
            i = order[t, k]
            f = beta * scale * (total - x[i]) + h[i]
            new = 1 if u[t, k] < 0.5 * (1.0 + math.tanh(f)) else -1
            total += new - x[i]
            x[i] = new


def glauber_sweeps(model: ModelSpec, x: np.ndarray, sweeps: int, rng: np.random.Generator,
                   random_scan: bool = False) -> np.ndarray:
    """Run ``sweeps`` heat-bath sweeps in place on one configuration.

    A sweep visits sites 0..n-1 in order (or a fresh random permutation per
    sweep with ``random_scan``).  The site is set to +1 with probability
    (1 + tanh(local field))/2; the ghost spin is never touched.
    """
    if sweeps <= 0:
        return x
    n = model.n
    g = model.graph
    u = rng.random((sweeps, n))
    if random_scan:
        order = np.argsort(rng.random((sweeps, n)), axis=1)
    else:
        order = np.broadcast_to(np.arange(n), (sweeps, n))
    order = np.ascontiguousarray(order, dtype=np.int64)
    h = np.ascontiguousarray(model.effective_field(), dtype=np.float64)
    if g.kind == "complete":
        _glauber_complete(x, g.scale, float(model.beta), h, order, u)
    else:
        indptr, indices = g.csr_arrays()
        _glauber_csr(x, indptr, indices, g.scale, float(model.beta), h, order, u)
    return x


def glauber_sample(model: ModelSpec, chain: ChainConfig, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` configurations from one Glauber chain, shape (count, n), int8."""
    x = initial_states(model.n, 1, chain.initial_state, rng)[0].copy()
    glauber_sweeps(model, x, chain.burn_in(GLAUBER_BURN_IN), rng, chain.random_scan)
    out = np.empty((count, model.n), dtype=np.int8)
    for k in range(count):
        if k:
            glauber_sweeps(model, x, chain.thinning_sweeps, rng, chain.random_scan)
        out[k] = x
    return out


# ----------------------------------------------------------------------------
# Curie–Weiss exact sampler


class AuxiliaryDensity:
    """Tabulated law of W with density ∝ exp(-n f(w)),

        f(w) = βw²/2 - (1/n) Σ_i log cosh(βw + μ_i).

    The grid spans every mode and extends until the density has dropped by
    e^{-50}; spacing is at most 1/(40·√(nβ)), well below the width of any peak.
    Inverse-CDF sampling then uses a piecewise-linear CDF.
    """

    def __init__(self, n: int, beta: float, mu, max_points: int = 2_000_000):
        if beta <= 0:
            raise SamplerError("the auxiliary density needs beta > 0")
        self.n = n
        self.beta = float(beta)
        self.mu = np.asarray(mu, dtype=float)
        modes, lo, hi, gmax = cw_density_support(n, beta, self.mu)
        self.modes = modes
        spacing = 1.0 / (40.0 * math.sqrt(n * beta))
        points = int(min(max((hi - lo) / spacing, 4001), max_points))
        self.grid = np.linspace(lo, hi, points)
        logd = cw_log_density(self.grid, n, beta, self.mu) - gmax
        dens = np.exp(logd)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(self.grid))])
        if not (np.isfinite(cdf[-1]) and cdf[-1] > 0):
            raise SamplerError(f"could not tabulate auxiliary density (mass={cdf[-1]})")
        self.cdf = cdf / cdf[-1]

    def f(self, w):
        return -cw_log_density(w, self.n, self.beta, self.mu) / self.n

    def sample(self, rng: np.random.Generator, size=None):
        return np.interp(rng.random(size), self.cdf, self.grid)


def curie_weiss_exact_sample(n: int, beta: float, field, rng: np.random.Generator,
                             count: int | None = None, density: AuxiliaryDensity | None = None):
    """Exact draw(s) from the Curie–Weiss model with Q_ij = 1(i≠j)/n.

    Draw W from :class:`AuxiliaryDensity`, then set each spin independently to
    +1 with probability (1 + tanh(βW + μ_i))/2.  Returns shape (n,) when
    ``count`` is None, else (count, n).  Pass a prebuilt ``density`` to skip
    the tabulation on repeated calls.
    """
    mu = np.zeros(n) if field is None else np.asarray(getattr(field, "values", field), dtype=float)
    reps = 1 if count is None else count
    if beta == 0:
        eta = np.broadcast_to(mu, (reps, n))
    else:
        dens = density if density is not None else AuxiliaryDensity(n, beta, mu)
        w = dens.sample(rng, reps)
        eta = beta * w[:, None] + mu[None, :]
    p = 0.5 * (1.0 + np.tanh(eta))
    x = np.where(rng.random((reps, n)) < p, 1, -1).astype(np.int8)
    return x[0] if count is None else x


# ----------------------------------------------------------------------------
# Swendsen–Wang / Edwards–Sokal


@dataclass(frozen=True)
class BondConfiguration:
    """Open/closed state of every lattice bond.

    ``open_edges`` aligns with ``graph.edges``; ``open_ghost`` aligns with the
    unit ghost bonds listed by ``np.repeat(np.arange(n), graph.ghost_bonds)``.
    """

    open_edges: np.ndarray
    open_ghost: np.ndarray

    @property
    def num_open(self) -> int:
        return int(self.open_edges.sum() + self.open_ghost.sum())


def _require_lattice(model: ModelSpec):
    if model.graph.kind != "lattice":
        raise SamplerError("Swendsen–Wang is implemented for lattice graphs only")


def _ghost_sites(graph: CouplingGraph) -> np.ndarray:
    if graph.ghost_bonds is None:
        return np.empty(0, dtype=np.int64)
    return np.repeat(np.arange(graph.n, dtype=np.int64), graph.ghost_bonds)


def bond_probability(beta: float, scale: float = 1.0) -> float:
    return -math.expm1(-2.0 * beta * scale)


def fk_ising_bond_sample(model: ModelSpec, x, rng: np.random.Generator) -> BondConfiguration:
    """Edwards–Sokal half-step: open each satisfied bond with p = 1 - e^{-2β}."""
    _require_lattice(model)
    g = model.graph
    x = np.asarray(x)
    p = bond_probability(model.beta, g.scale)
    e = g.edges
    sat = x[e[:, 0]] == x[e[:, 1]]
    open_e = sat & (rng.random(len(e)) < p)
    gs = _ghost_sites(g)
    open_g = (x[gs] == 1) & (rng.random(len(gs)) < p)
    return BondConfiguration(open_e, open_g)


@njit(cache=True, nogil=True)
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@njit(cache=True, nogil=True)
def _sw_kernel(X, edges, gsites, has_ghost, p, mu, u_bond, u_sign):
    R, n = X.shape
    E = edges.shape[0]
    G = gsites.shape[0]
    m = n + 1
    parent = np.empty(m, dtype=np.int64)
    h = np.empty(m, dtype=np.float64)
    sign = np.empty(m, dtype=np.int8)
    for r in range(R):
        for i in range(m):
            parent[i] = i
        for k in range(E):
            a = edges[k, 0]
            b = edges[k, 1]
            if X[r, a] == X[r, b] and u_bond[r, k] < p:
                ra = _find(parent, a)
                rb = _find(parent, b)
                if ra != rb:
                    parent[ra] = rb
        if has_ghost:
            for k in range(G):
                a = gsites[k]
                if X[r, a] == 1 and u_bond[r, E + k] < p:
                    ra = _find(parent, a)
                    rb = _find(parent, n)
                    if ra != rb:
                        parent[ra] = rb
        for i in range(m):
            h[i] = 0.0
        for i in range(n):
            h[_find(parent, i)] += mu[i]
        for i in range(m):
            if parent[i] == i:
                if u_sign[r, i] < 0.5 * (1.0 + math.tanh(h[i])):
                    sign[i] = 1
                else:
                    sign[i] = -1
        if has_ghost:
            sign[_find(parent, n)] = 1
        for i in range(n):
            X[r, i] = sign[_find(parent, i)]


def swendsen_wang_step(model: ModelSpec, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One Swendsen–Wang update applied independently to every row of ``X``.

    Bonds between equal spins open with probability p = 1 - e^{-2β}; each
    cluster then takes sign +1 with probability 1/(1 + exp(-2 Σ_{i∈C} μ_i)).
    Under the plus boundary the cluster holding the ghost is fixed to +1.
    Clusters are found by union-find; the input array is not modified.
    """
    g = model.graph
    X = np.array(X, dtype=np.int8, copy=True, ndmin=2)
    R, n = X.shape
    p = bond_probability(model.beta, g.scale)
    gs = _ghost_sites(g)
    u_bond = rng.random((R, len(g.edges) + len(gs)))
    u_sign = rng.random((R, n + 1))
    mu = np.ascontiguousarray(model.mu, dtype=np.float64)
    _sw_kernel(X, g.edges, gs, g.has_ghost, p, mu, u_bond, u_sign)
    return X


def swendsen_wang_chains(model: ModelSpec, chains: int, steps: int, rng: np.random.Generator,
                         initial_state: str = "uniform_random", batch: int = 256) -> np.ndarray:
    """Final states of ``chains`` independent Swendsen–Wang chains after ``steps`` updates."""
    _require_lattice(model)
    out = np.empty((chains, model.n), dtype=np.int8)
    for lo in range(0, chains, batch):
        hi = min(lo + batch, chains)
        X = initial_states(model.n, hi - lo, initial_state, rng)
        for _ in range(steps):
            X = swendsen_wang_step(model, X, rng)
        out[lo:hi] = X
    return out


def swendsen_wang_sample(model: ModelSpec, chain: ChainConfig, count: int, rng: np.random.Generator,
                         parallel_chains: int = 1) -> np.ndarray:
    """``count`` configurations from Swendsen–Wang, shape (count, n).

    With ``parallel_chains = k > 1`` the draws come from k independent chains
    advanced in lockstep; row ``j`` belongs to chain ``j % k``.
    """
    _require_lattice(model)
    k = max(1, min(parallel_chains, count))
    X = initial_states(model.n, k, chain.initial_state, rng)
    for _ in range(chain.burn_in(SW_BURN_IN)):
        X = swendsen_wang_step(model, X, rng)
    out = np.empty((count, model.n), dtype=np.int8)
    for lo in range(0, count, k):
        if lo:
            for _ in range(chain.thinning_sweeps):
                X = swendsen_wang_step(model, X, rng)
        hi = min(lo + k, count)
        out[lo:hi] = X[: hi - lo]
    return out


# ----------------------------------------------------------------------------


def sample_null(model: ModelSpec, count: int, rng: np.random.Generator,
                chain: ChainConfig | None = None) -> np.ndarray:
    """``count`` (approximately) independent draws using the best sampler for the graph.

    Complete graphs use the exact sampler; lattices run one independent
    Swendsen–Wang chain per draw; other graphs run independent Glauber chains.
    """
    chain = chain or ChainConfig()
    g = model.graph
    if g.kind == "complete":
        return curie_weiss_exact_sample(g.n, model.beta, model.mu, rng, count=count)
    if g.kind == "lattice":
        return swendsen_wang_chains(model, count, chain.burn_in(SW_BURN_IN), rng, chain.initial_state)
    out = np.empty((count, g.n), dtype=np.int8)
    starts = initial_states(g.n, count, chain.initial_state, rng)
    for k in range(count):
        x = starts[k].copy()
        glauber_sweeps(model, x, chain.burn_in(GLAUBER_BURN_IN), rng, chain.random_scan)
        out[k] = x
    return out


def sample_streams(model: ModelSpec, rngs, chain: ChainConfig | None = None,
                   density: AuxiliaryDensity | None = None, batch: int = 256) -> np.ndarray:
    """One draw per generator in ``rngs``, row k using only ``rngs[k]``.

    Rows therefore do not depend on how replications are grouped or threaded.
    Lattices still advance up to ``batch`` Swendsen–Wang chains per compiled
    call, with each chain's uniforms taken from its own stream.
    """
    chain = chain or ChainConfig()
    g = model.graph
    n = g.n
    rngs = list(rngs)
    out = np.empty((len(rngs), n), dtype=np.int8)
    if g.kind == "complete":
        if model.beta > 0 and density is None:
            density = AuxiliaryDensity(n, model.beta, model.mu)
        for k, r in enumerate(rngs):
            out[k] = curie_weiss_exact_sample(n, model.beta, model.mu, r, density=density)
        return out
    if g.kind == "lattice":
        p = bond_probability(model.beta, g.scale)
        gs = _ghost_sites(g)
        mu = np.ascontiguousarray(model.mu, dtype=np.float64)
        steps = chain.burn_in(SW_BURN_IN)
        nb = len(g.edges) + len(gs)
        for lo in range(0, len(rngs), batch):
            grp = rngs[lo:lo + batch]
            X = np.concatenate([initial_states(n, 1, chain.initial_state, r) for r in grp])
            for _ in range(steps):
                u_bond = np.stack([r.random(nb) for r in grp])
                u_sign = np.stack([r.random(n + 1) for r in grp])
                _sw_kernel(X, g.edges, gs, g.has_ghost, p, mu, u_bond, u_sign)
            out[lo:lo + len(grp)] = X
        return out
    for k, r in enumerate(rngs):
        x = initial_states(n, 1, chain.initial_state, r)[0].copy()
        glauber_sweeps(model, x, chain.burn_in(GLAUBER_BURN_IN), r, chain.random_scan)
        out[k] = x
    return out


def write_samples_csv(path, samples) -> None:
    """One row per configuration, ±1 entries."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in np.atleast_2d(samples):
            w.writerow(int(v) for v in row)
