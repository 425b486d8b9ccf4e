"""Monte Carlo estimates of Type I, worst-case Type II and total risk.

Replication ``r`` of a null cell uses stream SeedSequence(seed, (b, 0, 0, r)),
and of placement ``p`` at constant index ``j`` uses (seed, (b, j + 1, p + 1, r)),
where ``b`` is the β index.  Sampling and any randomized test draw both come
from that stream, so results do not depend on the number of threads.
"""
from __future__ import annotations

import configparser
import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .adaptive import ChiTable, adaptive_test, build_chi_table
from .classes import (ScanClass, build_disjoint_class, build_rectangle_class, build_scan_grid,
                      default_eta, disjoint_blocks, RectangleGridParams, apply_signal)
from .detectors import (bonferroni_combine, centered_sum_test, estimate_null_means, high_temp_scan_test,
                        lattice_scan_test, low_temp_randomized_scan_test, scan_z)
from .meanfield import InfeasibleSignalError, signal_strength_for_constant
from .model import (CouplingGraph, ModelSpec, build_complete, build_erdos_renyi, build_lattice,
                    build_random_regular)
from .samplers import AuxiliaryDensity, ChainConfig, sample_streams
from .susceptibility import estimate_chi

__all__ = [
    "ExperimentPlan",
    "PlanError",
    "RiskPoint",
    "RiskReport",
    "CSV_FIELDS",
    "TESTS",
    "clopper_pearson",
    "load_plan",
    "parse_plan",
    "build_graph",
    "build_class",
    "default_placements",
    "rejection_rate",
    "run_risk",
    "sweep_phase_diagram",
    "write_risk_csv",
]

CSV_FIELDS = ("beta", "family", "n", "s", "class_size", "c", "A", "test", "delta", "type1", "type1_lo",
              "type1_hi", "type2", "type2_lo", "type2_hi", "risk", "seed")
TESTS = ("high_temp_scan", "low_temp_randomized_scan", "lattice_scan", "centered_sum", "bonferroni", "adaptive")
FAMILIES = ("curie_weiss", "erdos_renyi", "random_regular", "lattice")


class PlanError(ValueError):
    """Invalid or inconsistent experiment plan."""


@dataclass(frozen=True)
class ExperimentPlan:
    """Everything needed to reproduce a risk sweep.

    ``n`` is the site count for graph families and is derived from
    ``side``/``dim`` for lattices.  ``chi`` is used by the lattice test; when it
    is None it is estimated at every β from ``chi_replications`` null draws.
    ``placements`` lists explicit supports; empty means the default set.
    """

    family: str = "curie_weiss"
    n: int = 2000
    p: float = 0.5
    degree: int = 10
    side: int = 64
    dim: int = 2
    boundary: str = "free"
    graph_seed: int = 0
    betas: tuple = (0.5,)
    class_kind: str = "disjoint_blocks"
    s: int = 100
    count: int | None = None
    eta: float | None = None
    test: str = "high_temp_scan"
    delta: float = 0.2
    multiplier: float = 3.0
    constants: tuple = (1.0,)
    type1_replications: int = 500
    type2_replications: int = 200
    placements: tuple = ()
    seed: int = 0
    chi: float | None = None
    chi_replications: int = 2000
    centering_replications: int = 500
    chi_table_replications: int = 300
    burn_in: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise PlanError(f"unknown family {self.family!r}")
        if self.test not in TESTS:
            raise PlanError(f"unknown test {self.test!r}")
        if self.type1_replications < 1 or self.type2_replications < 1:
            raise PlanError("replications must be >= 1")
        if any(not c >= 0 for c in self.constants):
            raise PlanError("constants must be nonnegative")
        if not self.delta > 0:
            raise PlanError("delta must be > 0")
        if self.family != "lattice" and self.test == "lattice_scan":
            raise PlanError("lattice_scan needs the lattice family")

    @property
    def sites(self) -> int:
        return self.side ** self.dim if self.family == "lattice" else self.n

    @property
    def constant_family(self) -> str:
        return "lattice" if self.family == "lattice" else "mean_field"


# ----------------------------------------------------------------------------
# plan files

_SECTIONS = {
    "model": {"family": str, "n": int, "p": float, "degree": int, "side": int, "dim": int, "boundary": str,
              "graph_seed": int, "burn_in": int},
    "class": {"kind": str, "s": int, "count": int, "eta": float},
    "test": {"name": str, "delta": float, "multiplier": float, "chi": float, "chi_replications": int,
             "centering_replications": int, "chi_table_replications": int},
    "sweep": {"beta": float, "c": float, "type1_replications": int, "type2_replications": int, "seed": int},
    "placements": {},
}
_RENAME = {("class", "kind"): "class_kind", ("test", "name"): "test", ("sweep", "beta"): "betas",
           ("sweep", "c"): "constants"}
_LISTS = {("sweep", "beta"), ("sweep", "c")}


def parse_plan(text: str, seed: int | None = None) -> ExperimentPlan:
    """Build a plan from INI-style text (see the README for the schema).

    ``seed`` overrides ``[sweep] seed``; one of the two must be given.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise PlanError(str(exc)) from exc
    kw = {}
    for sec in cp.sections():
        if sec not in _SECTIONS:
            raise PlanError(f"unknown section [{sec}]")
        if sec == "placements":
            kw["placements"] = tuple(tuple(int(t) for t in v.replace(",", " ").split())
                                     for _, v in sorted(cp.items(sec), key=lambda kv: kv[0]))
            continue
        for key, raw in cp.items(sec):
            if key not in _SECTIONS[sec]:
                raise PlanError(f"unknown key {key!r} in [{sec}]")
            conv = _SECTIONS[sec][key]
            name = _RENAME.get((sec, key), key)
            try:
                if (sec, key) in _LISTS:
                    val = tuple(conv(t) for t in raw.replace(",", " ").split())
                else:
                    val = conv(raw.strip())
            except ValueError as exc:
                raise PlanError(f"bad value for {sec}.{key}: {raw!r}") from exc
            kw[name] = val
    if seed is not None:
        kw["seed"] = int(seed)
    if "seed" not in kw:
        raise PlanError("plan must set [sweep] seed")
    return ExperimentPlan(**kw)


def load_plan(path, seed: int | None = None) -> ExperimentPlan:
    with open(path) as fh:
        return parse_plan(fh.read(), seed)


# ----------------------------------------------------------------------------
# building blocks


def build_graph(plan: ExperimentPlan) -> CouplingGraph:
    if plan.family == "curie_weiss":
        return build_complete(plan.n)
    if plan.family == "erdos_renyi":
        return build_erdos_renyi(plan.n, plan.p, np.random.default_rng(plan.graph_seed))
    if plan.family == "random_regular":
        return build_random_regular(plan.n, plan.degree, np.random.default_rng(plan.graph_seed))
    return build_lattice(plan.side, plan.dim, plan.boundary)


def build_class(plan: ExperimentPlan) -> ScanClass:
    n = plan.sites
    kind = plan.class_kind
    if kind == "disjoint_blocks":
        return disjoint_blocks(n, plan.s, plan.count)
    if plan.family != "lattice":
        raise PlanError(f"class kind {kind!r} needs the lattice family")
    if kind == "rectangle":
        return build_rectangle_class(n, plan.dim, plan.s)
    if kind == "scan_grid":
        eta = plan.eta if plan.eta is not None else default_eta(n, plan.s)
        return build_scan_grid(RectangleGridParams(n, plan.dim, plan.s, eta))
    if kind == "disjoint_cubes":
        return build_disjoint_class(n, plan.dim, plan.s)
    raise PlanError(f"unknown class kind {kind!r}")


def default_placements(cls: ScanClass) -> list[np.ndarray]:
    """Supports over which Type II is maximized.

    Explicit classes: the first candidate (enough for exchangeable graphs).
    Cube families: the member nearest the box center, plus the same cube
    shifted by half the anchor spacing along every axis when that spacing
    exceeds one site.
    """
    if not cls.is_cube_family:
        return [cls.candidate(0)]
    center = tuple(len(a) // 2 for a in cls.anchors)
    anchor = [int(a[c]) for a, c in zip(cls.anchors, center)]
    out = [_cube(anchor, cls)]
    spacing = [int(a[1] - a[0]) if len(a) > 1 else 1 for a in cls.anchors]
    if min(spacing) > 1:
        shifted = [a + sp // 2 for a, sp in zip(anchor, spacing)]
        if all(a + cls.cube <= cls.side for a in shifted):
            out.append(_cube(shifted, cls))
    return out


def _cube(anchor, cls):
    axes = np.meshgrid(*[np.arange(a, a + cls.cube) for a in anchor], indexing="ij")
    idx = np.zeros(axes[0].shape, dtype=np.int64)
    for ax in axes:
        idx = idx * cls.side + ax
    return idx.ravel()


def clopper_pearson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    ci = stats.binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="exact")
    return float(ci.low), float(ci.high)


def _stream(seed: int, key: tuple) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@dataclass
class _Context:
    """Per-β objects shared by all replications of one cell."""

    plan: ExperimentPlan
    model: ModelSpec
    cls: ScanClass
    chi: float | None = None
    centering: np.ndarray | None = None
    chi_table: ChiTable | None = None


def _decide(ctx: _Context, X: np.ndarray, rngs) -> np.ndarray:
    """Reject flags for each row of ``X``; row k may draw from ``rngs[k]``."""
    plan, cls = ctx.plan, ctx.cls
    beta = ctx.model.beta
    name = plan.test
    if name == "centered_sum":
        return np.array([centered_sum_test(x, beta, plan.multiplier).reject for x in X])
    if name == "adaptive":
        fam = "lattice" if plan.family == "lattice" else "mean_field"
        g = ctx.model.graph
        return np.array([adaptive_test(x, cls, plan.delta, r, fam, graph=g, chi_table=ctx.chi_table).reject
                         for x, r in zip(X, rngs)])
    z = scan_z(X, cls, ctx.centering).max(axis=1)
    if name == "high_temp_scan":
        return np.array([high_temp_scan_test(x, cls, plan.delta, z_max=zm).reject for x, zm in zip(X, z)])
    if name == "lattice_scan":
        return np.array([lattice_scan_test(x, cls, ctx.chi, plan.delta, z_max=zm).reject for x, zm in zip(X, z)])
    out = []
    for x, zm, r in zip(X, z, rngs):
        d = low_temp_randomized_scan_test(x, cls, beta, plan.delta, r, z_max=zm)
        if name == "bonferroni":
            d = bonferroni_combine(d, centered_sum_test(x, beta, plan.multiplier))
        out.append(d.reject)
    return np.array(out)


def rejection_rate(ctx: _Context, model: ModelSpec, keys, threads: int = 1, chunk: int = 64) -> int:
    """Number of rejections over replications with stream keys ``keys``."""
    chain = ChainConfig(burn_in_sweeps=ctx.plan.burn_in)
    density = None
    if model.graph.kind == "complete" and model.beta > 0:
        density = AuxiliaryDensity(model.n, model.beta, model.mu)
    keys = list(keys)
    parts = [keys[i:i + chunk] for i in range(0, len(keys), chunk)]

    def work(part):
        rngs = [_stream(ctx.plan.seed, k) for k in part]
        X = sample_streams(model, rngs, chain, density=density)
        return int(_decide(ctx, X, rngs).sum())

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return sum(pool.map(work, parts))


@dataclass(frozen=True)
class RiskPoint:
    beta: float
    c: float
    A: float
    type1: float
    type1_ci: tuple
    type2: float
    type2_ci: tuple
    type2_by_placement: tuple
    risk: float
    error: str | None = None


@dataclass
class RiskReport:
    plan: ExperimentPlan
    class_size: int
    s: int
    points: list = field(default_factory=list)
    runtime: float = 0.0
    type1: float = float("nan")
    type1_ci: tuple = (float("nan"), float("nan"))
    chi: float | None = None

    def rows(self):
        p = self.plan
        for pt in self.points:
            yield (repr(float(pt.beta)), p.family, p.sites, self.s, self.class_size, repr(float(pt.c)),
                   repr(float(pt.A)), p.test, repr(p.delta), repr(pt.type1), repr(pt.type1_ci[0]),
                   repr(pt.type1_ci[1]), repr(pt.type2), repr(pt.type2_ci[0]), repr(pt.type2_ci[1]), repr(pt.risk), p.seed)


def _context(plan: ExperimentPlan, beta: float, b_index: int, graph: CouplingGraph, cls: ScanClass) -> _Context:
    model = ModelSpec(graph, beta)
    ctx = _Context(plan, model, cls)
    if plan.family == "lattice":
        if plan.test == "adaptive":
            ctx.chi_table = build_chi_table(graph, cls.s, plan.seed, replications=plan.chi_table_replications)
        else:
            if plan.chi is not None:
                ctx.chi = plan.chi
            else:
                rng = _stream(plan.seed, (b_index, 0, 0, 1 << 31))
                ctx.chi = estimate_chi(model, cls.s, rng, plan.chi_replications,
                                       ChainConfig(burn_in_sweeps=plan.burn_in)).chi_hat
            if graph.has_ghost:
                ctx.centering = estimate_null_means(model, plan.centering_replications, plan.seed,
                                                    ChainConfig(burn_in_sweeps=plan.burn_in))
    return ctx


def run_risk(plan: ExperimentPlan, beta: float | None = None, b_index: int = 0, threads: int = 1,
             graph: CouplingGraph | None = None, cls: ScanClass | None = None) -> RiskReport:
    """Type I, worst-case Type II and risk at one β for every constant in the plan."""
    t0 = time.perf_counter()
    beta = plan.betas[0] if beta is None else beta
    graph = graph if graph is not None else build_graph(plan)
    cls = cls if cls is not None else build_class(plan)
    ctx = _context(plan, beta, b_index, graph, cls)
    placements = [np.asarray(S) for S in plan.placements] or default_placements(cls)
    report = RiskReport(plan, len(cls), cls.s)

    n1 = plan.type1_replications
    k1 = rejection_rate(ctx, ctx.model, [(b_index, 0, 0, r) for r in range(n1)], threads)
    type1 = k1 / n1
    ci1 = clopper_pearson(k1, n1)
    report.type1, report.type1_ci, report.chi = type1, ci1, ctx.chi
    n2 = plan.type2_replications
    for j, c in enumerate(plan.constants):
        try:
            A = signal_strength_for_constant(c, cls.s, cls.log_size, beta, plan.constant_family, ctx.chi)
        except (InfeasibleSignalError, ValueError) as exc:
            nan = float("nan")
            report.points.append(RiskPoint(beta, c, nan, type1, ci1, nan, (nan, nan), (), nan, str(exc)))
            continue
        per = []
        for p_idx, S in enumerate(placements):
            alt = ctx.model.with_field(apply_signal(S, A, graph.n))
            k2 = n2 - rejection_rate(ctx, alt, [(b_index, j + 1, p_idx + 1, r) for r in range(n2)], threads)
            per.append((k2 / n2, clopper_pearson(k2, n2)))
        worst = max(range(len(per)), key=lambda i: per[i][0])
        type2, ci2 = per[worst]
        report.points.append(RiskPoint(beta, c, A, type1, ci1, type2, ci2, tuple(v for v, _ in per),
                                       type1 + type2))
    report.runtime = time.perf_counter() - t0
    return report


def sweep_phase_diagram(plan: ExperimentPlan, threads: int = 1) -> list[RiskReport]:
    """:func:`run_risk` at every β of the plan (β index = position in the grid)."""
    if not plan.betas:
        return []
    graph = build_graph(plan)
    cls = build_class(plan)
    return [run_risk(plan, b, i, threads, graph, cls) for i, b in enumerate(plan.betas)]


def write_risk_csv(out, reports) -> None:
    """CSV rows for ``reports`` to a path or a text stream."""
    close = False
    if isinstance(out, (str, bytes)) or hasattr(out, "__fspath__"):
        out = open(out, "w", newline="")
        close = True
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for rep in reports:
            for row in rep.rows():
                w.writerow(row)
    finally:
        if close:
            out.close()
