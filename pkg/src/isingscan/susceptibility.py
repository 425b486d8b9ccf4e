"""Susceptibility of lattice Ising models from interior block sums.

χ̂ is the sample variance of Z_S = Σ_{i∈S} X_i/√s over independent null draws,
for a cube S kept at least ⌈log²(side)⌉ sites away from the boundary.  Its
standard error comes from the jackknife over draws.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .classes import integer_root_ceil
from .model import ModelSpec
from .samplers import ChainConfig, replication_rng, sample_null

__all__ = [
    "BETA_C_2D",
    "PlacementError",
    "SusceptibilityEstimate",
    "SweepResult",
    "interior_margin",
    "block_sites",
    "jackknife_variance",
    "estimate_chi",
    "chi_monotonicity_sweep",
    "write_sweep_csv",
]

BETA_C_2D = 0.5 * math.log(1.0 + math.sqrt(2.0))


class PlacementError(ValueError):
    """The block cannot keep the required distance from the boundary."""


@dataclass(frozen=True)
class SusceptibilityEstimate:
    beta: float
    bc: str
    chi_hat: float
    std_error: float
    s: int
    interior_margin: int
    replications: int


def interior_margin(side: int) -> int:
    return math.ceil(math.log(side) ** 2)


def block_sites(side: int, dim: int, s: int, anchor=None, margin: int | None = None) -> np.ndarray:
    """Sites of the k-cube (k = ⌈s^{1/d}⌉) at ``anchor``, default centered.

    Raises :class:`PlacementError` when the cube comes closer than ``margin``
    (default ⌈log² side⌉) to the boundary.
    """
    k = integer_root_ceil(s, dim)
    margin = interior_margin(side) if margin is None else margin
    if anchor is None:
        anchor = ((side - k) // 2,) * dim
    anchor = tuple(int(a) for a in anchor)
    if len(anchor) != dim:
        raise ValueError("anchor has the wrong dimension")
    for a in anchor:
        if a < margin or a + k > side - margin:
            raise PlacementError(
                f"cube of side {k} at {anchor} is within {margin} sites of the boundary of a box of side {side}")
    axes = np.meshgrid(*[np.arange(a, a + k) for a in anchor], indexing="ij")
    idx = np.zeros(axes[0].shape, dtype=np.int64)
    for ax in axes:
        idx = idx * side + ax
    return idx.ravel()


def jackknife_variance(z) -> tuple[float, float]:
    """Sample variance (ddof=1) and its leave-one-out jackknife standard error."""
    z = np.asarray(z, dtype=np.float64)
    n = len(z)
    if n < 3:
        raise ValueError("need at least 3 values")
    z = z - z.mean()
    s1, s2 = z.sum(), (z * z).sum()
    loo = (s2 - z * z - (s1 - z) ** 2 / (n - 1)) / (n - 2)
    var = s2 / (n - 1) - s1 * s1 / (n * (n - 1))
    se = math.sqrt((n - 1) / n * ((loo - loo.mean()) ** 2).sum())
    return float(var), se


def estimate_chi(model: ModelSpec, s: int, rng: np.random.Generator, replications: int = 2000,
                 chain: ChainConfig | None = None, anchor=None, margin: int | None = None
                 ) -> SusceptibilityEstimate:
    """χ̂ from ``replications`` independent null draws of a lattice model.

    The sample variance does not depend on the centering constant, so plus
    boundary draws are centered implicitly by the sample mean of Z_S.
    """
    g = model.graph
    if g.kind != "lattice":
        raise ValueError("susceptibility is defined here for lattice models only")
    side, dim = int(g.params["side"]), int(g.params["dim"])
    k = integer_root_ceil(s, dim)
    margin = interior_margin(side) if margin is None else margin
    sites = block_sites(side, dim, s, anchor, margin)
    X = sample_null(model.null(), replications, rng, chain)
    z = X[:, sites].sum(axis=1, dtype=np.int64) / math.sqrt(k ** dim)
    var, se = jackknife_variance(z)
    return SusceptibilityEstimate(float(model.beta), g.boundary, var, se, k ** dim, margin, replications)


@dataclass(frozen=True)
class SweepResult:
    estimates: tuple
    violations: tuple

    @property
    def increasing(self) -> bool:
        chis = [e.chi_hat for e in self.estimates]
        return all(b > a for a, b in zip(chis, chis[1:]))


def chi_monotonicity_sweep(model: ModelSpec, betas, s: int, seed: int, replications: int = 2000,
                           chain: ChainConfig | None = None, beta_c: float | None = None,
                           threads: int = 1) -> SweepResult:
    """χ̂ on an increasing β grid below β_c, flagging decreases beyond 2 SE.

    Grid point k uses stream (seed, k).  A pair (k, k+1) is a violation when
    χ̂_{k+1} ≤ χ̂_k - 2(se_k + se_{k+1}).  ``beta_c`` defaults to the exact
    two-dimensional value and must be given for other dimensions.
    """
    betas = [float(b) for b in betas]
    dim = int(model.graph.params["dim"])
    if beta_c is None:
        if dim != 2:
            raise ValueError("pass beta_c for dimensions other than 2")
        beta_c = BETA_C_2D
    if any(b >= beta_c for b in betas):
        raise ValueError(f"all betas must lie below beta_c = {beta_c:.6g}")

    def one(k):
        m = ModelSpec(model.graph, betas[k])
        return estimate_chi(m, s, replication_rng(seed, k), replications, chain)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        est = tuple(pool.map(one, range(len(betas))))
    bad = tuple((k, k + 1) for k in range(len(est) - 1)
                if est[k + 1].chi_hat <= est[k].chi_hat - 2 * (est[k].std_error + est[k + 1].std_error))
    return SweepResult(est, bad)


def write_sweep_csv(out, result: SweepResult) -> None:
    """Rows (beta, chi_hat, std_error, replications) to a path or text stream."""
    if isinstance(out, (str, bytes)) or hasattr(out, "__fspath__"):
        with open(out, "w", newline="") as fh:
            return write_sweep_csv(fh, result)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("beta", "chi_hat", "std_error", "replications"))
    for e in result.estimates:
        w.writerow((repr(e.beta), repr(e.chi_hat), repr(e.std_error), e.replications))
