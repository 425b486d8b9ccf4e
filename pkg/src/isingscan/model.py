"""Coupling graphs, external fields and Ising model specifications.

The Ising law used throughout the package is

    P(x) ∝ exp( (β/2) xᵀ Q x + μᵀ x ),   x ∈ {-1, +1}^n,

with Q symmetric, hollow and nonnegative.  Every graph is stored as a single
per-edge ``scale`` plus an edge list, so that memory stays linear in the number
of edges.  The complete graph is kept implicit.

Lattice sites are indexed in row-major (C) order over the ``dim``-dimensional
box of side ``side``; see :func:`lattice_index`.  The plus boundary condition is
realised by a ghost site clamped to +1: each real site ``i`` carries
``ghost_bonds[i]`` unit bonds to it (a corner of a 2-d box has two).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

__all__ = [
    "FREE",
    "PLUS",
    "CouplingGraph",
    "SignalSpec",
    "ModelSpec",
    "build_complete",
    "build_erdos_renyi",
    "build_random_regular",
    "build_lattice",
    "lattice_index",
    "lattice_coords",
    "hamiltonian",
    "local_field",
    "local_fields",
    "flip",
    "null_field",
    "dump_graph",
    "load_graph",
    "GraphError",
]

FREE = "free"
PLUS = "plus"
_BOUNDARIES = (FREE, PLUS)

# Upper bound on the number of lattice sites we are willing to allocate.
MAX_SITES = 1 << 28


class GraphError(ValueError):
    """Invalid graph parameters or failed random-graph generation."""


@dataclass(frozen=True, eq=False)
class CouplingGraph:
    """Symmetric, hollow, ferromagnetic coupling structure.

    Attributes
    ----------
    n : int
        Number of real sites.
    kind : str
        One of ``complete``, ``erdos_renyi``, ``random_regular``, ``lattice``.
    scale : float
        Weight carried by every edge (1/n, 1/(np), 1/d or 1).
    edges : ndarray of shape (E, 2)
        Unordered edges with ``i < j``.  Empty for the implicit complete graph.
    params : dict
        Construction parameters (``p``, ``d``, ``side``, ``dim``, ``boundary``).
    ghost_bonds : ndarray of shape (n,) or None
        Number of unit bonds from each site to the +1 ghost (plus boundary only).
    """

    n: int
    kind: str
    scale: float
    edges: np.ndarray
    params: dict = field(default_factory=dict)
    ghost_bonds: np.ndarray | None = None

    def __post_init__(self):
        self.edges.setflags(write=False)
        if self.ghost_bonds is not None:
            self.ghost_bonds.setflags(write=False)

    @property
    def boundary(self) -> str:
        return self.params.get("boundary", FREE)

    @property
    def has_ghost(self) -> bool:
        return self.ghost_bonds is not None

    @property
    def num_edges(self) -> int:
        if self.kind == "complete":
            return self.n * (self.n - 1) // 2
        return len(self.edges)

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Unweighted 0/1 adjacency among real sites, CSR (explicit graphs only)."""
        if self.kind == "complete":
            a = np.ones((self.n, self.n), dtype=np.int8)
            np.fill_diagonal(a, 0)
            return sparse.csr_matrix(a)
        e = self.edges
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        data = np.ones(len(rows), dtype=np.int8)
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))

    def degrees(self) -> np.ndarray:
        """Number of real neighbours per site (ghost bonds excluded)."""
        if self.kind == "complete":
            return np.full(self.n, self.n - 1)
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def weight(self, i: int, j: int) -> float:
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexError(f"site pair ({i}, {j}) out of range for n={self.n}")
        if i == j:
            return 0.0
        if self.kind == "complete":
            return self.scale
        return self.scale * float(self.adjacency[i, j])

    def to_dense(self) -> np.ndarray:
        """Dense Q among real sites.  Meant for small systems and tests."""
        return self.scale * self.adjacency.toarray().astype(float)

    def neighbor_sum(self, x: np.ndarray) -> np.ndarray:
        """Σ_j Q_ij x_j for every real site; works on (n,) or (reps, n) arrays."""
        x = np.asarray(x, dtype=float)
        if self.kind == "complete":
            tot = x.sum(axis=-1, keepdims=True)
            return self.scale * (tot - x)
        return self.scale * (self.adjacency @ x.T).T

    def ghost_field(self) -> np.ndarray:
        """Σ_j Q_{i,ghost}·(+1): the coupling each site receives from the ghost."""
        if self.ghost_bonds is None:
            return np.zeros(self.n)
        return self.scale * self.ghost_bonds.astype(float)

    def inf_norm(self) -> float:
        """‖Q‖_{∞→∞}: the largest row sum, ghost bonds included."""
        rows = self.degrees() * self.scale + self.ghost_field()
        return float(rows.max()) if self.n else 0.0

    def csr_arrays(self):
        """(indptr, indices) of the real-site adjacency, int64."""
        a = self.adjacency
        return a.indptr.astype(np.int64), a.indices.astype(np.int64)

    @cached_property
    def key(self) -> tuple:
        """Hashable identity, used to cache derived quantities."""
        digest = hash(self.edges.tobytes())
        ghost = None if self.ghost_bonds is None else hash(self.ghost_bonds.tobytes())
        return (self.kind, self.n, self.scale, tuple(sorted(self.params.items())), digest, ghost)


@dataclass(frozen=True, eq=False)
class SignalSpec:
    """Nonnegative external field supported on ``support``."""

    n: int
    support: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        if len(set(self.support)) != len(self.support):
            raise ValueError("support indices must be distinct")
        if any(i < 0 or i >= self.n for i in self.support):
            raise ValueError("support index out of range")
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.n,):
            raise ValueError(f"field must have shape ({self.n},), got {v.shape}")
        if np.any(v < 0):
            raise ValueError("field entries must be nonnegative")
        off = np.ones(self.n, dtype=bool)
        off[list(self.support)] = False
        if np.any(v[off] != 0):
            raise ValueError("field must vanish off the support")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def uniform(cls, n: int, support: Iterable[int], strength: float) -> "SignalSpec":
        if strength < 0:
            raise ValueError("signal strength must be nonnegative")
        support = tuple(int(i) for i in support)
        if any(i < 0 or i >= n for i in support):
            raise ValueError("support index out of range")
        v = np.zeros(n)
        v[list(support)] = strength
        return cls(n, support, v)

    @classmethod
    def from_vector(cls, mu: Sequence[float]) -> "SignalSpec":
        mu = np.asarray(mu, dtype=float)
        support = tuple(int(i) for i in np.flatnonzero(mu))
        return cls(len(mu), support, mu)

    @property
    def sparsity(self) -> int:
        return len(self.support)


def null_field(n: int) -> SignalSpec:
    return SignalSpec(n, (), np.zeros(n))


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Graph, inverse temperature and external field: one Ising measure."""

    graph: CouplingGraph
    beta: float
    field: SignalSpec | None = None

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.field is None:
            object.__setattr__(self, "field", null_field(self.graph.n))
        elif self.field.n != self.graph.n:
            raise ValueError("field and graph sizes differ")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def mu(self) -> np.ndarray:
        return self.field.values

    def effective_field(self) -> np.ndarray:
        """μ plus the ghost coupling β·Q_{i,ghost} (zero without a ghost)."""
        return self.mu + self.beta * self.graph.ghost_field()

    def with_field(self, field: SignalSpec | None) -> "ModelSpec":
        return ModelSpec(self.graph, self.beta, field)

    def null(self) -> "ModelSpec":
        return ModelSpec(self.graph, self.beta, None)


# ----------------------------------------------------------------------------
# builders


def build_complete(n: int) -> CouplingGraph:
    """Curie–Weiss coupling Q_ij = 1(i != j)/n."""
    if n < 2:
        raise GraphError(f"complete graph needs n >= 2, got {n}")
    return CouplingGraph(n, "complete", 1.0 / n, np.empty((0, 2), dtype=np.int64))


def build_erdos_renyi(n: int, p: float, rng: np.random.Generator) -> CouplingGraph:
    """G(n, p) with present edges weighted 1/(np)."""
    if not 0 < p < 1:
        raise GraphError(f"p must lie in (0, 1), got {p}")
    if n < 2:
        raise GraphError(f"need n >= 2, got {n}")
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    edges = np.stack([iu[keep], ju[keep]], axis=1).astype(np.int64)
    return CouplingGraph(n, "erdos_renyi", 1.0 / (n * p), edges, {"p": float(p)})


def build_random_regular(
    n: int, d: int, rng: np.random.Generator, max_attempts: int | None = None
) -> CouplingGraph:
    """Simple d-regular graph from the pairing model, weights 1/d.

    Pairings containing self-loops or repeated pairs are rejected and redrawn,
    at most ``max_attempts`` times (default ``10 * n``).
    """
    if d < 1 or d >= n:
        raise GraphError(f"need 1 <= d < n, got d={d}, n={n}")
    if (n * d) % 2:
        raise GraphError(f"n*d must be even, got n={n}, d={d}")
    attempts = 10 * n if max_attempts is None else max_attempts
    stubs = np.repeat(np.arange(n, dtype=np.int64), d)
    for _ in range(attempts):
        perm = rng.permutation(stubs).reshape(-1, 2)
        if np.any(perm[:, 0] == perm[:, 1]):
            continue
        e = np.sort(perm, axis=1)
        codes = e[:, 0] * n + e[:, 1]
        if len(np.unique(codes)) != len(codes):
            continue
        order = np.argsort(codes)
        return CouplingGraph(n, "random_regular", 1.0 / d, e[order], {"d": int(d)})
    raise GraphError(f"no simple {d}-regular pairing on {n} vertices after {attempts} attempts")


def lattice_index(coords, side: int) -> np.ndarray:
    """Row-major site index of integer coordinates (last axis = coordinate)."""
    coords = np.asarray(coords)
    dim = coords.shape[-1]
    return np.ravel_multi_index(tuple(np.moveaxis(coords, -1, 0)), (side,) * dim)


def lattice_coords(index, side: int, dim: int) -> np.ndarray:
    return np.stack(np.unravel_index(np.asarray(index), (side,) * dim), axis=-1)


def build_lattice(side: int, dim: int, boundary: str = FREE) -> CouplingGraph:
    """Nearest-neighbour box {0..side-1}^dim with unit couplings."""
    if side < 2:
        raise GraphError(f"lattice side must be >= 2, got {side}")
    if dim < 1:
        raise GraphError(f"lattice dimension must be >= 1, got {dim}")
    if boundary not in _BOUNDARIES:
        raise GraphError(f"boundary must be one of {_BOUNDARIES}, got {boundary!r}")
    if side**dim > MAX_SITES:
        raise GraphError(f"{side}^{dim} sites exceeds the limit of {MAX_SITES}")
    shape = (side,) * dim
    n = side**dim
    idx = np.arange(n, dtype=np.int64).reshape(shape)
    chunks = []
    for ax in range(dim):
        lo = np.take(idx, np.arange(side - 1), axis=ax).ravel()
        hi = np.take(idx, np.arange(1, side), axis=ax).ravel()
        chunks.append(np.stack([lo, hi], axis=1))
    edges = np.concatenate(chunks)
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    ghost = None
    if boundary == PLUS:
        coords = lattice_coords(np.arange(n), side, dim)
        ghost = ((coords == 0).sum(axis=1) + (coords == side - 1).sum(axis=1)).astype(np.int64)
    params = {"side": int(side), "dim": int(dim), "boundary": boundary}
    return CouplingGraph(n, "lattice", 1.0, edges, params, ghost)


# ----------------------------------------------------------------------------
# energies


def _check_config(graph: CouplingGraph, x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[-1] != graph.n:
        raise ValueError(f"configuration has {x.shape[-1]} sites, graph has {graph.n}")
    return x


def hamiltonian(model: ModelSpec, x) -> float | np.ndarray:
    """(β/2)·xᵀQx + μᵀx with the ghost spin (if any) clamped to +1.

    Accepts a single configuration or a stack of shape (reps, n).
    """
    x = _check_config(model.graph, x).astype(float)
    pair = 0.5 * model.beta * np.sum(x * model.graph.neighbor_sum(x), axis=-1)
    out = pair + x @ model.effective_field()
    return float(out) if np.ndim(out) == 0 else out


def local_fields(model: ModelSpec, x) -> np.ndarray:
    """β·Σ_j Q_ij x_j + μ_i (+ ghost coupling) at every site."""
    x = _check_config(model.graph, x)
    return model.beta * model.graph.neighbor_sum(x) + model.effective_field()


def local_field(model: ModelSpec, x, i: int) -> float:
    x = _check_config(model.graph, x)
    if not 0 <= i < model.n:
        raise IndexError(f"site {i} out of range for n={model.n}")
    g = model.graph
    if g.kind == "complete":
        s = g.scale * (float(np.sum(x)) - x[i])
    else:
        indptr, indices = g.adjacency.indptr, g.adjacency.indices
        s = g.scale * float(np.sum(x[indices[indptr[i]:indptr[i + 1]]]))
    return model.beta * s + float(model.effective_field()[i])


def flip(x, i: int) -> np.ndarray:
    y = np.array(x, copy=True)
    y[i] = -y[i]
    return y


# ----------------------------------------------------------------------------
# serialization


def dump_graph(graph: CouplingGraph, path) -> None:
    """Write ``n``, ``kind``, then one ``i j weight`` line per edge.

    Ghost bonds (plus boundary) are written as ``i ghost weight`` lines where
    the weight counts the unit bonds from site ``i`` to the ghost.
    """
    with open(path, "w") as fh:
        fh.write(f"{graph.n}\n")
        extra = " ".join(f"{k}={v}" for k, v in sorted(graph.params.items()))
        fh.write(f"{graph.kind} {extra}".rstrip() + "\n")
        if graph.kind == "complete":
            iu, ju = np.triu_indices(graph.n, k=1)
            pairs = zip(iu, ju)
        else:
            pairs = graph.edges
        w = repr(float(graph.scale))
        for i, j in pairs:
            fh.write(f"{i} {j} {w}\n")
        if graph.ghost_bonds is not None:
            for i in np.flatnonzero(graph.ghost_bonds):
                fh.write(f"{i} ghost {repr(float(graph.scale * graph.ghost_bonds[i]))}\n")


def _parse_value(v: str):
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def load_graph(path) -> CouplingGraph:
    with open(path) as fh:
        n = int(fh.readline())
        head = fh.readline().split()
        kind = head[0]
        params = dict(tok.split("=", 1) for tok in head[1:])
        params = {k: _parse_value(v) for k, v in params.items()}
        edges, weights = [], []
        ghost = np.zeros(n, dtype=np.int64) if params.get("boundary") == PLUS else None
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            i, j, w = parts
            if j == "ghost":
                ghost[int(i)] = int(round(float(w)))
                continue
            edges.append((int(i), int(j)))
            weights.append(float(w))
    if kind == "complete":
        return build_complete(n)
    scale = weights[0] if weights else 1.0
    e = np.array(edges, dtype=np.int64).reshape(-1, 2)
    return CouplingGraph(n, kind, scale, e, params, ghost)
