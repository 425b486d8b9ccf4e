"""Candidate-support families for scan tests.

A :class:`ScanClass` is either an explicit list of supports or a lazily
enumerated family of axis-aligned cubes on a lattice.  Cube families are
indexed row-major over their anchor grid, and each cube's sites are listed in
increasing (row-major) order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy import sparse

from .model import SignalSpec

__all__ = [
    "ScanClass",
    "RectangleGridParams",
    "ClassError",
    "gamma_distance",
    "greedy_cover",
    "integer_root_ceil",
    "lattice_side",
    "build_rectangle_class",
    "build_scan_grid",
    "build_disjoint_class",
    "disjoint_blocks",
    "default_eta",
    "default_epsilon",
    "apply_signal",
    "write_class",
    "read_class",
]


class ClassError(ValueError):
    """Geometry does not admit the requested family."""


def integer_root_ceil(s: int, d: int) -> int:
    """Smallest integer k with k**d >= s."""
    if s < 1 or d < 1:
        raise ValueError("need s >= 1 and d >= 1")
    k = max(1, int(round(s ** (1.0 / d))))
    while k ** d < s:
        k += 1
    while k > 1 and (k - 1) ** d >= s:
        k -= 1
    return k


def lattice_side(n_sites: int, d: int) -> int:
    """Side length L with L**d == n_sites."""
    L = integer_root_ceil(n_sites, d)
    if L ** d != n_sites:
        raise ClassError(f"{n_sites} sites do not form a {d}-dimensional cube")
    return L


def _cube_sites(anchor: Sequence[int], k: int, side: int) -> np.ndarray:
    d = len(anchor)
    axes = [np.arange(a, a + k) for a in anchor]
    mesh = np.meshgrid(*axes, indexing="ij")
    idx = np.zeros(mesh[0].shape, dtype=np.int64)
    for ax in range(d):
        idx = idx * side + mesh[ax]
    return idx.ravel()


@dataclass(frozen=True, eq=False)
class ScanClass:
    """Finite family of candidate supports, all of size ``s``.

    Explicit classes keep a (K, s) array; cube classes keep only the lattice
    side, dimension, cube side and the anchor coordinates along each axis.
    """

    n: int
    s: int
    provenance: str
    params: dict = field(default_factory=dict)
    explicit: np.ndarray | None = None
    side: int | None = None
    dim: int | None = None
    cube: int | None = None
    anchors: tuple | None = None

    def __post_init__(self):
        if self.explicit is not None:
            arr = np.sort(np.asarray(self.explicit, dtype=np.int64), axis=1)
            if arr.ndim != 2 or arr.shape[0] == 0:
                raise ClassError("a class needs at least one candidate")
            if arr.shape[1] != self.s:
                raise ClassError(f"every candidate must have {self.s} sites")
            if arr.min() < 0 or arr.max() >= self.n:
                raise ClassError("candidate site out of range")
            if np.any(arr[:, 1:] == arr[:, :-1]):
                raise ClassError("candidate with repeated sites")
            if len(np.unique(arr, axis=0)) != len(arr):
                raise ClassError("candidates must be distinct")
            arr.setflags(write=False)
            object.__setattr__(self, "explicit", arr)
        elif self.anchors is None:
            raise ClassError("either explicit candidates or cube anchors are required")
        else:
            anchors = tuple(np.asarray(a, dtype=np.int64) for a in self.anchors)
            if any(len(a) == 0 for a in anchors):
                raise ClassError("empty anchor set")
            object.__setattr__(self, "anchors", anchors)

    @classmethod
    def from_supports(cls, n: int, supports: Iterable[Iterable[int]], provenance: str = "explicit",
                      params: dict | None = None) -> "ScanClass":
        rows = [sorted(int(i) for i in S) for S in supports]
        if not rows:
            raise ClassError("a class needs at least one candidate")
        s = len(rows[0])
        if any(len(r) != s for r in rows):
            raise ClassError("candidates must share one size")
        return cls(n, s, provenance, params or {}, explicit=np.array(rows, dtype=np.int64))

    @property
    def is_cube_family(self) -> bool:
        return self.explicit is None

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.anchors)

    def __len__(self) -> int:
        if self.explicit is not None:
            return len(self.explicit)
        return int(np.prod(self.grid_shape))

    @property
    def log_size(self) -> float:
        return math.log(len(self))

    def anchor(self, i: int) -> tuple[int, ...]:
        pos = np.unravel_index(i, self.grid_shape)
        return tuple(int(a[p]) for a, p in zip(self.anchors, pos))

    def candidate(self, i: int) -> np.ndarray:
        if not 0 <= i < len(self):
            raise IndexError(i)
        if self.explicit is not None:
            return self.explicit[i]
        return _cube_sites(self.anchor(i), self.cube, self.side)

    def __iter__(self) -> Iterator[np.ndarray]:
        for i in range(len(self)):
            yield self.candidate(i)

    @cached_property
    def supports(self) -> np.ndarray:
        """All candidates as a (K, s) array (materializes cube families)."""
        if self.explicit is not None:
            return self.explicit
        out = np.empty((len(self), self.s), dtype=np.int64)
        for i in range(len(self)):
            out[i] = self.candidate(i)
        out.setflags(write=False)
        return out

    @cached_property
    def incidence(self) -> sparse.csr_matrix:
        """K × n 0/1 matrix of candidate membership."""
        sup = self.supports
        K = len(sup)
        rows = np.repeat(np.arange(K), self.s)
        return sparse.csr_matrix((np.ones(K * self.s), (rows, sup.ravel())), shape=(K, self.n))


def gamma_distance(S1, S2) -> float:
    """√2·(1 - |S1 ∩ S2| / √(|S1||S2|))."""
    a, b = set(int(i) for i in S1), set(int(i) for i in S2)
    if not a or not b:
        raise ValueError("gamma distance needs nonempty sets")
    return math.sqrt(2.0) * (1.0 - len(a & b) / math.sqrt(len(a) * len(b)))


def _gamma_to_member(cls: ScanClass, j: int) -> np.ndarray:
    inc = cls.incidence
    overlap = np.asarray(inc @ inc.getrow(j).T.toarray()).ravel()
    return math.sqrt(2.0) * (1.0 - overlap / cls.s)


def greedy_cover(cls: ScanClass, eps: float) -> ScanClass:
    """Farthest-point ε-net of ``cls`` under γ.

    Start from candidate 0, then repeatedly add the candidate farthest from the
    current net until every candidate is within ``eps``.  Ties go to the lowest
    index.
    """
    if not eps > 0:
        raise ValueError("eps must be > 0")
    chosen = [0]
    dist = _gamma_to_member(cls, 0)
    while True:
        far = int(np.argmax(dist))
        if dist[far] <= eps:
            break
        chosen.append(far)
        dist = np.minimum(dist, _gamma_to_member(cls, far))
    params = dict(cls.params, eps=float(eps), base=cls.provenance)
    return ScanClass(cls.n, cls.s, "greedy_cover", params, explicit=cls.supports[np.sort(chosen)])


def build_rectangle_class(n_sites: int, d: int, s: int) -> ScanClass:
    """All cubes of side ⌈s^{1/d}⌉ inside the box of ``n_sites`` sites."""
    L = lattice_side(n_sites, d)
    k = integer_root_ceil(s, d)
    if k > L:
        raise ClassError(f"cube of side {k} does not fit in a box of side {L}")
    anchors = tuple(np.arange(L - k + 1) for _ in range(d))
    return ScanClass(n_sites, k ** d, "rectangle", {"side": L, "dim": d, "s": s},
                     side=L, dim=d, cube=k, anchors=anchors)


def default_eta(n_sites: int, s: int) -> float:
    """min(1/2, 1/√log(n/s)), or 1/2 when n/s ≤ e."""
    r = math.log(n_sites / s)
    return 0.5 if r <= 1 else min(0.5, 1.0 / math.sqrt(r))


def default_epsilon(n: int) -> float:
    """Covering radius 1/√log n used for mean-field nets."""
    return 1.0 / math.sqrt(math.log(n))


@dataclass(frozen=True)
class RectangleGridParams:
    n_sites: int
    dim: int
    s: int
    eta: float

    def __post_init__(self):
        if not 0 < self.eta <= 1:
            raise ClassError(f"eta must lie in (0, 1], got {self.eta}")

    @property
    def side(self) -> int:
        return lattice_side(self.n_sites, self.dim)

    @property
    def cube(self) -> int:
        return integer_root_ceil(self.s, self.dim)

    @property
    def pitch(self) -> int:
        return int(round(self.eta * self.cube))


def build_scan_grid(params: RectangleGridParams) -> ScanClass:
    """Cubes anchored every ``round(η·k)`` sites along each axis, from 0.

    Per axis there are ⌊(L - k)/pitch⌋ + 1 anchors, so every cube of the full
    class is within ``pitch - 1`` sites of a grid cube along each axis.
    """
    L, k, pitch = params.side, params.cube, params.pitch
    if pitch < 1:
        raise ClassError(f"grid pitch rounds to 0 (eta={params.eta}, cube side={k})")
    if k > L:
        raise ClassError(f"cube of side {k} does not fit in a box of side {L}")
    anchors = tuple(np.arange(0, L - k + 1, pitch) for _ in range(params.dim))
    meta = {"side": L, "dim": params.dim, "s": params.s, "eta": params.eta, "pitch": pitch}
    return ScanClass(params.n_sites, k ** params.dim, "rectangle_grid", meta,
                     side=L, dim=params.dim, cube=k, anchors=anchors)


def build_disjoint_class(n_sites: int, d: int, s: int) -> ScanClass:
    """Center cubes of the tiling by cubes of side 3k, k = ⌈s^{1/d}⌉.

    Each tile contributes the cube at offset k inside it, so distinct members
    are separated by at least 2k sites along some axis.  Partial tiles at the
    far end of each axis are dropped.
    """
    L = lattice_side(n_sites, d)
    k = integer_root_ceil(s, d)
    tiles = L // (3 * k)
    if tiles == 0:
        raise ClassError(f"box of side {L} is smaller than one tile of side {3 * k}")
    anchors = tuple(3 * k * np.arange(tiles) + k for _ in range(d))
    return ScanClass(n_sites, k ** d, "disjoint_blocks", {"side": L, "dim": d, "s": s},
                     side=L, dim=d, cube=k, anchors=anchors)


def disjoint_blocks(n: int, s: int, count: int | None = None) -> ScanClass:
    """Consecutive blocks [j·s, (j+1)·s) for j < count (default: as many as fit)."""
    fit = n // s
    count = fit if count is None else count
    if count < 1 or count > fit:
        raise ClassError(f"cannot place {count} disjoint blocks of size {s} in {n} sites")
    sup = np.arange(count * s, dtype=np.int64).reshape(count, s)
    return ScanClass(n, s, "disjoint_blocks", {"count": count}, explicit=sup)


def apply_signal(support, A: float, n: int) -> SignalSpec:
    """Uniform field of strength A on ``support``."""
    return SignalSpec.uniform(n, support, A)


def write_class(cls: ScanClass, path) -> None:
    """One candidate per line, space-separated site indices."""
    with open(path, "w") as fh:
        fh.write(f"# n={cls.n} s={cls.s} provenance={cls.provenance}\n")
        for S in cls:
            fh.write(" ".join(str(int(i)) for i in S) + "\n")


def read_class(path, n: int | None = None) -> ScanClass:
    """Inverse of :func:`write_class`; ``n`` overrides the header value."""
    rows, header = [], {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    key, _, val = tok.partition("=")
                    header[key] = val
                continue
            rows.append([int(t) for t in line.split()])
    if n is None:
        if "n" not in header:
            raise ClassError("class file has no n= header; pass n explicitly")
        n = int(header["n"])
    return ScanClass.from_supports(n, rows, header.get("provenance", "explicit"))

