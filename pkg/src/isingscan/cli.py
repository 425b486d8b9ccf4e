"""Command-line entry point.

Exit codes: 0 success, 1 usage error (including a missing ``--seed`` on a
stochastic subcommand), 2 runtime error.  Results go to CSV files or stdout,
progress and diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import os
import sys

import numpy as np

__all__ = ["main"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n\n{self.format_usage()}")


@contextlib.contextmanager
def _output(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")


def _require_seed(args):
    if args.seed is None:
        raise UsageError(f"{args.command}: --seed is required (no implicit randomness)")


def _log(msg):
    print(msg, file=sys.stderr, flush=True)


def _read_samples(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([int(t) for t in line.split(",")])
    X = np.array(rows, dtype=np.int8)
    if X.ndim != 2 or not np.isin(X, (-1, 1)).all():
        raise ValueError(f"{path}: expected rows of ±1 values")
    return X


# ----------------------------------------------------------------------------
# shared options


def _add_graph_options(p):
    g = p.add_argument_group("model")
    g.add_argument("--graph", help="graph file (overrides the family options)")
    g.add_argument("--family", default="curie_weiss",
                   choices=("curie_weiss", "erdos_renyi", "random_regular", "lattice"))
    g.add_argument("--n", type=int, default=100, help="site count (non-lattice families)")
    g.add_argument("--p", type=float, default=0.5, help="edge probability (erdos_renyi)")
    g.add_argument("--degree", type=int, default=10, help="degree (random_regular)")
    g.add_argument("--side", type=int, default=8, help="lattice side length")
    g.add_argument("--dim", type=int, default=2, help="lattice dimension")
    g.add_argument("--boundary", default="free", choices=("free", "plus"))
    g.add_argument("--graph-seed", type=int, default=0, help="seed for random graph families")


def _graph(args):
    from .model import load_graph
    from .risk import ExperimentPlan, build_graph

    if args.graph:
        return load_graph(args.graph)
    plan = ExperimentPlan(family=args.family, n=args.n, p=args.p, degree=args.degree, side=args.side,
                          dim=args.dim, boundary=args.boundary, graph_seed=args.graph_seed)
    return build_graph(plan)


def _add_class_options(p):
    g = p.add_argument_group("scan class")
    g.add_argument("--class-file", help="class file, one candidate per line")
    g.add_argument("--class-kind", default="disjoint_blocks",
                   choices=("disjoint_blocks", "rectangle", "scan_grid", "disjoint_cubes"))
    g.add_argument("--s", type=int, default=10, help="candidate size")
    g.add_argument("--count", type=int, help="number of disjoint blocks (default: as many as fit)")
    g.add_argument("--eta", type=float, help="scan grid pitch factor")


def _scan_class(args, graph):
    from .classes import read_class
    from .risk import ExperimentPlan, build_class

    if args.class_file:
        return read_class(args.class_file, n=graph.n)
    lattice = graph.kind == "lattice"
    plan = ExperimentPlan(family="lattice" if lattice else "curie_weiss", n=graph.n,
                          side=int(graph.params.get("side", 2)), dim=int(graph.params.get("dim", 1)),
                          class_kind=args.class_kind, s=args.s, count=args.count, eta=args.eta)
    return build_class(plan)


# ----------------------------------------------------------------------------
# subcommands


def _cmd_sample(args):
    from .model import ModelSpec, SignalSpec
    from .samplers import ChainConfig, curie_weiss_exact_sample, glauber_sample, swendsen_wang_sample

    _require_seed(args)
    g = _graph(args)
    field = None
    if args.support:
        field = SignalSpec.uniform(g.n, [int(t) for t in args.support.split(",")], args.A)
    model = ModelSpec(g, args.beta, field)
    chain = ChainConfig(args.burn_in, args.thinning, args.initial_state)
    rng = np.random.default_rng(args.seed)
    how = args.sampler
    if how == "auto":
        how = "cw" if g.kind == "complete" else "sw" if g.kind == "lattice" else "glauber"
    if how == "cw":
        X = curie_weiss_exact_sample(g.n, model.beta, model.mu, rng, count=args.count)
    elif how == "glauber":
        X = glauber_sample(model, chain, args.count, rng)
    elif how == "sw":
        X = swendsen_wang_sample(model, chain, args.count, rng)
    with _output(args.out) as fh:
        w = _csv_writer(fh)
        for row in X:
            w.writerow(int(v) for v in row)
    _log(f"sample: wrote {len(X)} configurations of {g.n} sites")


def _cmd_test(args):
    from .adaptive import adaptive_test, build_chi_table
    from .detectors import (DECISION_FIELDS, bonferroni_combine, centered_sum_test, estimate_null_means,
                            high_temp_scan_test, lattice_scan_test, low_temp_randomized_scan_test)
    from .model import ModelSpec

    _require_seed(args)
    g = _graph(args)
    cls = _scan_class(args, g)
    X = _read_samples(args.samples)
    if X.shape[1] != g.n:
        raise ValueError(f"samples have {X.shape[1]} sites, graph has {g.n}")
    if args.test == "lattice_scan" and args.chi is None:
        raise UsageError("test: lattice_scan needs --chi")
    rng = np.random.default_rng(args.seed)
    centering = None
    if args.test == "lattice_scan" and g.has_ghost:
        centering = estimate_null_means(ModelSpec(g, args.beta), args.centering_replications, args.seed)
    chi_table = None
    if args.test == "adaptive" and g.kind == "lattice":
        chi_table = build_chi_table(g, cls.s, args.seed, replications=args.chi_table_replications)
    with _output(args.out) as fh:
        w = _csv_writer(fh)
        w.writerow(DECISION_FIELDS)
        for x in X:
            t = args.test
            if t == "high_temp_scan":
                d = high_temp_scan_test(x, cls, args.delta)
            elif t == "low_temp_randomized_scan":
                d = low_temp_randomized_scan_test(x, cls, args.beta, args.delta, rng)
            elif t == "lattice_scan":
                d = lattice_scan_test(x, cls, args.chi, args.delta, centering)
            elif t == "centered_sum":
                d = centered_sum_test(x, args.beta, args.multiplier)
            elif t == "bonferroni":
                d = bonferroni_combine(low_temp_randomized_scan_test(x, cls, args.beta, args.delta, rng),
                                       centered_sum_test(x, args.beta, args.multiplier))
            else:
                fam = "lattice" if g.kind == "lattice" else "mean_field"
                d = adaptive_test(x, cls, args.delta, rng, fam, graph=g, chi_table=chi_table)
            w.writerow(d.to_row())


def _cmd_estimate_beta(args):
    from .adaptive import fit_beta_pseudolikelihood, regime_classifier

    g = _graph(args)
    X = _read_samples(args.samples)
    with _output(args.out) as fh:
        w = _csv_writer(fh)
        w.writerow(("row", "beta_hat", "residual", "clamped", "regime"))
        for k, x in enumerate(X):
            fit = fit_beta_pseudolikelihood(x, g, beta_max=args.beta_max)
            w.writerow((k, repr(fit.beta_hat), repr(fit.residual), fit.clamped or "",
                        regime_classifier(x) if len(x) >= 3 else ""))


def _cmd_susceptibility(args):
    from .model import ModelSpec
    from .susceptibility import chi_monotonicity_sweep, write_sweep_csv

    _require_seed(args)
    g = _graph(args)
    if g.kind != "lattice":
        raise UsageError("susceptibility needs --family lattice")
    betas = [float(t) for t in args.betas.split(",")]
    res = chi_monotonicity_sweep(ModelSpec(g, 0.0), betas, args.s, args.seed, args.replications,
                                 beta_c=args.beta_c, threads=args.threads)
    with _output(args.out) as fh:
        write_sweep_csv(fh, res)
    for a, b in res.violations:
        _log(f"susceptibility: monotonicity violated between beta={betas[a]} and beta={betas[b]}")


def _cmd_sweep(args):
    from .risk import load_plan, sweep_phase_diagram, write_risk_csv

    _require_seed(args)
    plan = load_plan(args.plan, seed=args.seed)
    reports = sweep_phase_diagram(plan, threads=args.threads)
    with _output(args.out) as fh:
        write_risk_csv(fh, reports)
    for rep in reports:
        for pt in rep.points:
            if pt.error:
                _log(f"sweep: beta={pt.beta} c={pt.c}: {pt.error}")
        _log(f"sweep: beta={rep.points[0].beta if rep.points else '?'} done in {rep.runtime:.1f}s")


def _cmd_figure1(args):
    from .meanfield import figure1_table

    table = figure1_table(args.beta_max, args.steps)
    with _output(args.out) as fh:
        w = _csv_writer(fh)
        w.writerow(("beta", "m", "constant"))
        for b, m, c in table:
            w.writerow((repr(float(b)), repr(float(m)), repr(float(c))))


def _cmd_oracle_check(args):
    from .invariants import run_oracle_suite

    _require_seed(args)
    results = run_oracle_suite(args.seed, args.max_n, args.instances)
    with _output(args.out) as fh:
        w = _csv_writer(fh)
        w.writerow(("check", "instances", "worst", "tolerance", "passed"))
        for r in results:
            w.writerow((r.name, r.instances, repr(r.worst), repr(r.tolerance), int(r.passed)))
    if not all(r.passed for r in results):
        raise RuntimeError("oracle invariant suite failed: " + ", ".join(r.name for r in results if not r.passed))


def _parser() -> _Parser:
    p = _Parser(prog="isingscan", description="Ising-model scan tests: sampling, testing, estimation, sweeps.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    threads = os.cpu_count() or 1

    s = sub.add_parser("sample", help="draw spin configurations")
    _add_graph_options(s)
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--sampler", default="auto", choices=("auto", "cw", "glauber", "sw"))
    s.add_argument("--support", help="comma-separated signal sites")
    s.add_argument("--A", type=float, default=0.0, help="signal strength on --support")
    s.add_argument("--burn-in", type=int)
    s.add_argument("--thinning", type=int, default=5)
    s.add_argument("--initial-state", default="uniform_random", choices=("uniform_random", "all_plus", "all_minus"))
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=_cmd_sample)

    t = sub.add_parser("test", help="apply a test to configurations from a samples CSV")
    _add_graph_options(t)
    _add_class_options(t)
    t.add_argument("--samples", required=True)
    t.add_argument("--test", default="high_temp_scan",
                   choices=("high_temp_scan", "low_temp_randomized_scan", "lattice_scan", "centered_sum",
                            "bonferroni", "adaptive"))
    t.add_argument("--beta", type=float, default=0.0)
    t.add_argument("--delta", type=float, default=0.2)
    t.add_argument("--chi", type=float)
    t.add_argument("--multiplier", type=float, default=3.0)
    t.add_argument("--centering-replications", type=int, default=500)
    t.add_argument("--chi-table-replications", type=int, default=300)
    t.add_argument("--seed", type=int)
    t.add_argument("--out")
    t.set_defaults(func=_cmd_test)

    e = sub.add_parser("estimate-beta", help="pseudo-likelihood β̂ for each configuration")
    _add_graph_options(e)
    e.add_argument("--samples", required=True)
    e.add_argument("--beta-max", type=float, default=10.0)
    e.add_argument("--out")
    e.set_defaults(func=_cmd_estimate_beta)

    c = sub.add_parser("susceptibility", help="χ̂ over a β grid with a monotonicity check")
    _add_graph_options(c)
    c.add_argument("--betas", required=True, help="comma-separated β values below β_c")
    c.add_argument("--s", type=int, default=64)
    c.add_argument("--replications", type=int, default=2000)
    c.add_argument("--beta-c", type=float)
    c.add_argument("--threads", type=int, default=threads)
    c.add_argument("--seed", type=int)
    c.add_argument("--out")
    c.set_defaults(func=_cmd_susceptibility)

    w = sub.add_parser("sweep", help="risk sweep from a plan file")
    w.add_argument("--plan", required=True)
    w.add_argument("--threads", type=int, default=threads)
    w.add_argument("--seed", type=int)
    w.add_argument("--out")
    w.set_defaults(func=_cmd_sweep)

    f = sub.add_parser("figure1", help="m(β) and the sharp constant on a β grid")
    f.add_argument("--beta-max", type=float, default=3.0)
    f.add_argument("--steps", type=int, default=100)
    f.add_argument("--out")
    f.set_defaults(func=_cmd_figure1)

    o = sub.add_parser("oracle-check", help="exact-oracle invariant suite")
    o.add_argument("--max-n", type=int, default=10)
    o.add_argument("--instances", type=int, default=200)
    o.add_argument("--seed", type=int)
    o.add_argument("--out")
    o.set_defaults(func=_cmd_oracle_check)
    return p


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        args.func(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures map to exit code 2
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
