"""Batch command-line front end.

Subcommands: ``validate``, ``stats``, ``bound``, ``sweep``, ``greedy``,
``bench``, ``gen``, ``probe``.  Problems arrive either as a builtin example id
(``A``..``G``) or as a problem JSON (graph + query + optional conditioning
event) with the probability table in a separate CSV, so tables can be swapped
under a fixed problem.

Exit codes: 0 success, 2 model/validation error, 3 capacity error.  Failures
are reported as one JSON object on stderr with a machine-readable ``code``.
Result payloads are deterministic for fixed seeds and worker counts; wall
times appear only in ``bench`` reports, which are exempt by nature.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bounds import (
    Bounds,
    ProbabilityTable,
    bounds_closed_form,
    bounds_finite_data,
    bounds_finite_data_with_observation,
    bounds_from_pruned,
    bounds_from_pruned_observed,
    bounds_naive,
    bounds_naive_with_observation,
    delta_sweep,
    sweep_to_csv,
    table_from_csv,
    table_to_csv,
)
from .datagen import (
    BUILTIN_IDS,
    DEFAULT_MC_SAMPLES,
    InstanceSpec,
    builtin_example,
    generate,
    random_instance,
    table_from_model,
)
from .errors import (
    BudgetExceeded,
    CapExceeded,
    CapacityExceeded,
    CausalBoundsError,
    DimensionMismatch,
    GraphValidationError,
    InfeasibleError,
    ObservationImpossible,
    ObservationInvalidatesQuery,
    PreconditionFailed,
    ScopeOutsideB,
    SizeCap,
    UnboundedError,
)
from .graph import Problem, critical_for_query, problem_from_json, problem_to_json, reduce_query
from .greedy import (
    GreedyRun,
    conjecture13_probe,
    greedy_run,
    probe_batch,
    runs_to_bounds,
)
from .hyperarcs import PrunedProblem, build_pruned, build_pruned_observed, candidate_count, load_pruned
from .lp import DEFAULT_COLUMN_CAP
from .responses import (
    DEFAULT_R_CAP,
    build_pruned_by_enumeration,
    build_pruned_by_enumeration_observed,
    count_R,
    response_space,
)

SOLVER_ID = "scipy-linprog-highs"
DEFAULT_BUDGET_S = 1200.0

EXIT_OK = 0
EXIT_MODEL = 2
EXIT_CAPACITY = 3

# Ordered most-specific-first; the first matching entry supplies the
# machine-readable code and the process exit status.
_ERROR_MAP: tuple[tuple[type, str, int], ...] = (
    (CapacityExceeded, "capacity-exceeded", EXIT_CAPACITY),
    (CapExceeded, "profile-cap-exceeded", EXIT_CAPACITY),
    (SizeCap, "column-cap-exceeded", EXIT_CAPACITY),
    (BudgetExceeded, "budget-exceeded", EXIT_CAPACITY),
    (GraphValidationError, "graph-invalid", EXIT_MODEL),
    (ScopeOutsideB, "scope-outside-endogenous", EXIT_MODEL),
    (DimensionMismatch, "dimension-mismatch", EXIT_MODEL),
    (ObservationImpossible, "observation-impossible", EXIT_MODEL),
    (ObservationInvalidatesQuery, "observation-invalidates-query", EXIT_MODEL),
    (PreconditionFailed, "precondition-failed", EXIT_MODEL),
    (InfeasibleError, "table-infeasible", EXIT_MODEL),
    (UnboundedError, "lp-unbounded", EXIT_MODEL),
    (CausalBoundsError, "model-error", EXIT_MODEL),
)


@dataclass(frozen=True)
class RunConfig:
    """Everything one subcommand invocation needs, decoded from argv."""

    subcommand: str
    example: str | None = None
    graph: str | None = None
    table: str | None = None
    problem: str | None = None
    method: str = "auto"
    delta: float = 0.0
    delta_grid: str | None = None
    conditioned: bool = False
    mode: str = "quadrature"
    seed: int = 0
    seeds: int | None = None
    n_samples: int = DEFAULT_MC_SAMPLES
    passes: int = 1
    workers: int = 1
    r_cap: int | None = DEFAULT_R_CAP
    col_cap: int = DEFAULT_COLUMN_CAP
    budget_s: float = DEFAULT_BUDGET_S
    out: str | None = None

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        fields = {f.name for f in dataclasses.fields(cls)}
        cfg = cls(**{k: v for k, v in vars(args).items() if k in fields})
        if cfg.workers < 1:
            raise ValueError("--workers must be at least 1")
        if cfg.passes < 1:
            raise ValueError("--passes must be at least 1")
        if cfg.delta < 0:
            raise ValueError("--delta must be non-negative")
        return cfg


# ---------------------------------------------------------------------------
# input plumbing


def _load_problem(cfg: RunConfig, *, want_table: bool) -> tuple[Problem, ProbabilityTable | None]:
    """Resolve the problem (builtin id or problem JSON) and, when asked for,
    its table (CSV when given, otherwise the builtin model's table per the
    seed/mode flags)."""
    if cfg.example is not None:
        ex = builtin_example(cfg.example)
        problem = Problem(ex.graph, ex.query, ex.observation)
        table: ProbabilityTable | None = None
        if cfg.table is not None:
            table = table_from_csv(problem.graph, Path(cfg.table).read_text())
        elif want_table:
            _, table = generate(
                InstanceSpec(cfg.example, cfg.mode, cfg.seed, n_samples=cfg.n_samples)
            )
        return problem, table
    if cfg.graph is None:
        raise ValueError("give a builtin example id or --graph with a problem JSON")
    problem = problem_from_json(Path(cfg.graph).read_text())
    table = None
    if cfg.table is not None:
        table = table_from_csv(problem.graph, Path(cfg.table).read_text())
    elif want_table:
        raise ValueError("this subcommand needs a probability table: pass --table")
    return problem, table


def _require_observation(problem: Problem) -> None:
    if problem.observation is None or not problem.observation.observed:
        raise ValueError("--conditioned needs a problem with a conditioning event")


def _emit(cfg: RunConfig, payload: str) -> None:
    if cfg.out is not None:
        Path(cfg.out).write_text(payload)
    else:
        sys.stdout.write(payload)


def _json_payload(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _bounds_payload(res: Bounds, cfg: RunConfig, conditioned: bool) -> dict:
    return {
        "method": res.method,
        "lower": float(res.lower) + 0.0,  # +0.0 folds IEEE -0.0 into 0.0
        "upper": float(res.upper) + 0.0,
        "width": float(res.width) + 0.0,
        "status": res.status,
        "h_size": None if res.h_size is None else int(res.h_size),
        "r_count": None if res.r_count is None else int(res.r_count),
        "candidates": None if res.candidates is None else int(res.candidates),
        "delta": float(cfg.delta),
        "conditioned": bool(conditioned),
    }


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(cfg: RunConfig) -> int:
    problem, table = _load_problem(cfg, want_table=False)
    g = problem.graph
    crit = critical_for_query(g, problem.query)
    reduced = reduce_query(g, problem.query)
    payload = {
        "valid": True,
        "nodes": g.n,
        "context_nodes": [g.names[i] for i in g.a_nodes],
        "endogenous_nodes": [g.names[i] for i in g.b_nodes],
        "critical_context": [g.names[i] for i in g.a_nodes if crit >> i & 1],
        "reduced_context_size": len(reduced.context),
        "has_observation": problem.observation is not None,
        "table_checked": table is not None,
    }
    _emit(cfg, _json_payload(payload))
    return EXIT_OK


def _sci(x: int) -> str:
    return f"{float(x):.1e}"


def cmd_stats(cfg: RunConfig) -> int:
    problem, _ = _load_problem(cfg, want_table=False)
    g = problem.graph
    n_r = count_R(g)
    n_cand = candidate_count(g)
    n_valid = build_pruned(g, problem.query).size
    lines = (
        f"|R| = {n_r} ({_sci(n_r)})\n"
        f"candidates = {n_cand} ({_sci(n_cand)})\n"
        f"|H| = {n_valid} ({_sci(n_valid)})\n"
    )
    if cfg.out is not None:
        payload = {
            "r_count": n_r,
            "r_count_sci": _sci(n_r),
            "candidates": n_cand,
            "candidates_sci": _sci(n_cand),
            "h_size": n_valid,
            "h_size_sci": _sci(n_valid),
        }
        Path(cfg.out).write_text(_json_payload(payload))
    sys.stdout.write(lines)
    return EXIT_OK


def _select_method(problem: Problem, cfg: RunConfig) -> tuple[str, PrunedProblem | None]:
    """Resolve ``auto`` (closed-form when every context node is critical and
    the run is plain, else the pruned LP when the valid-table count fits the
    column cap, else the greedy heuristic) and return any pruned problem the
    decision already required, so it is not built twice."""
    if cfg.method != "auto":
        return cfg.method, None
    g, q = problem.graph, problem.query
    crit = critical_for_query(g, q)
    if crit & g.a_mask == g.a_mask and not cfg.conditioned and cfg.delta == 0.0:
        return "closed-form", None
    if cfg.delta > 0:
        return "pruned", None  # the one interval-constrained method
    if cfg.conditioned:
        pp = build_pruned_observed(g, q, problem.observation)
    else:
        pp = build_pruned(g, q)
    if pp.size <= cfg.col_cap:
        return "pruned", pp
    if cfg.conditioned:
        raise PreconditionFailed(
            f"{pp.size} valid tables exceed the column cap {cfg.col_cap} and the "
            "greedy fallback bounds unconditioned queries only"
        )
    return "greedy", pp


def cmd_bound(cfg: RunConfig) -> int:
    problem, table = _load_problem(cfg, want_table=True)
    assert table is not None
    g, q = problem.graph, problem.query
    if cfg.conditioned:
        _require_observation(problem)
    w = problem.observation if cfg.conditioned else None
    method, pp = _select_method(problem, cfg)
    if cfg.delta > 0 and method != "pruned":
        raise ValueError(f"--delta applies to the pruned LP, not method {method!r}")

    if method == "closed-form":
        if cfg.conditioned:
            raise PreconditionFailed("the closed form does not support conditioning")
        res = bounds_closed_form(g, q, table)
    elif method == "naive":
        if w is not None:
            res = bounds_naive_with_observation(
                g, q, w, table, r_cap=cfg.r_cap, column_cap=cfg.col_cap
            )
        else:
            res = bounds_naive(g, q, table, r_cap=cfg.r_cap, column_cap=cfg.col_cap)
    elif method == "pruned":
        if cfg.delta > 0:
            if w is not None:
                res = bounds_finite_data_with_observation(
                    g, q, w, table, cfg.delta, column_cap=cfg.col_cap
                )
            else:
                res = bounds_finite_data(g, q, table, cfg.delta, column_cap=cfg.col_cap)
        elif w is not None:
            pp = pp if pp is not None else build_pruned_observed(g, q, w, table.values)
            res = bounds_from_pruned_observed(pp, table, column_cap=cfg.col_cap)
        else:
            pp = pp if pp is not None else build_pruned(g, q, table.values)
            res = bounds_from_pruned(pp, table, column_cap=cfg.col_cap)
    elif method == "greedy":
        if w is not None:
            raise PreconditionFailed("the greedy heuristic bounds unconditioned queries only")
        pp = pp if pp is not None else build_pruned(g, q, table.values)
        lo = greedy_run(pp, table.values, sense="lower", passes=cfg.passes)
        hi = greedy_run(pp, table.values, sense="upper", passes=cfg.passes)
        res = runs_to_bounds(pp, lo, hi)
    else:
        raise ValueError(f"unknown method {cfg.method!r}")
    _emit(cfg, _json_payload(_bounds_payload(res, cfg, conditioned=w is not None)))
    return EXIT_OK


def _parse_grid(text: str) -> list[float]:
    grid = [float(tok) for tok in text.split(",") if tok.strip()]
    if not grid:
        raise ValueError("--delta-grid must list at least one value")
    return grid


def cmd_sweep(cfg: RunConfig) -> int:
    problem, table = _load_problem(cfg, want_table=True)
    assert table is not None
    if cfg.delta_grid is None:
        raise ValueError("sweep needs --delta-grid (comma-separated radii)")
    w = None
    if cfg.conditioned:
        _require_observation(problem)
        w = problem.observation
    points = delta_sweep(
        problem.graph,
        problem.query,
        w,
        table,
        _parse_grid(cfg.delta_grid),
        column_cap=cfg.col_cap,
    )
    _emit(cfg, sweep_to_csv(points))
    return EXIT_OK


def _lam_histogram(run: GreedyRun) -> dict[str, int]:
    lam = run.lam
    counts = {
        "-1": int(np.sum(lam == -1)),
        "0": int(np.sum(lam == 0)),
        "1": int(np.sum(lam == 1)),
    }
    counts["other"] = int(lam.size - sum(counts.values()))
    return counts


def greedy_batch(
    example_id: str,
    n_seeds: int,
    *,
    passes: int = 1,
    col_cap: int = DEFAULT_COLUMN_CAP,
    workers: int = 1,
    exact_tol: float = 1e-8,
    rel_tol: float = 0.10,
    sandwich_tol: float = 1e-6,
) -> dict:
    """Greedy-vs-LP quality summary over seeded single-draw model instances.

    For each seed one latent value is drawn and the builtin model's table is
    built conditional on it (``table_from_model`` with one Monte Carlo draw),
    then the greedy certificates are compared with the pruned-LP optima.
    Reports the fraction of instances with an exact lower bound, an exact
    upper bound, an upper bound within ``rel_tol`` relative excess, and the
    certified-sandwich check, which must hold on every instance.  The greedy
    values are exact certificates (the integer dual vector is feasibility-
    checked at return), so the sandwich comparison only needs to absorb noise
    in the LP optima; ``sandwich_tol`` is therefore looser than ``exact_tol``.
    """
    ex = builtin_example(example_id)
    pp = build_pruned(ex.graph, ex.query)
    if pp.size > col_cap:
        raise SizeCap(pp.size, col_cap)

    def one(seed: int) -> tuple[bool, bool, bool, bool]:
        table = table_from_model(ex.model, "monte-carlo", seed=seed, n_samples=1)
        lp = bounds_from_pruned(pp, table, column_cap=col_cap)
        lo = greedy_run(pp, table.values, sense="lower", passes=passes)
        hi = greedy_run(pp, table.values, sense="upper", passes=passes)
        gb = runs_to_bounds(pp, lo, hi)
        sandwich = (
            gb.lower <= lp.lower + sandwich_tol and lp.upper <= gb.upper + sandwich_tol
        )
        lower_exact = abs(gb.lower - lp.lower) <= exact_tol
        upper_exact = abs(gb.upper - lp.upper) <= exact_tol
        rel_excess = (gb.upper - lp.upper) / max(lp.upper, 1e-12)
        return lower_exact, upper_exact, rel_excess <= rel_tol, sandwich

    seeds = range(n_seeds)
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, seeds))
    else:
        rows = [one(s) for s in seeds]
    n = max(len(rows), 1)
    return {
        "example": example_id.upper(),
        "instances": len(rows),
        "passes": passes,
        "workers": workers,
        "lower_exact": sum(r[0] for r in rows) / n,
        "upper_exact": sum(r[1] for r in rows) / n,
        "upper_within_rel": sum(r[2] for r in rows) / n,
        "rel_tol": rel_tol,
        "sandwich_ok": sum(r[3] for r in rows) / n,
    }


def cmd_greedy(cfg: RunConfig) -> int:
    if cfg.seeds is not None:
        if cfg.example is None:
            raise ValueError("batch greedy (--seeds) needs a builtin example id")
        summary = greedy_batch(
            cfg.example,
            cfg.seeds,
            passes=cfg.passes,
            col_cap=cfg.col_cap,
            workers=cfg.workers,
        )
        _emit(cfg, _json_payload(summary))
        return EXIT_OK
    problem, table = _load_problem(cfg, want_table=True)
    assert table is not None
    g, q = problem.graph, problem.query
    if cfg.problem is not None:
        pp = load_pruned(cfg.problem, g, q)
    else:
        pp = build_pruned(g, q, table.values)
    lo = greedy_run(pp, table.values, sense="lower", passes=cfg.passes)
    hi = greedy_run(pp, table.values, sense="upper", passes=cfg.passes)
    res = runs_to_bounds(pp, lo, hi)
    payload = _bounds_payload(res, cfg, conditioned=False)
    payload.update(
        {
            "steps": int(lo.steps + hi.steps),
            "passes": int(cfg.passes),
            "uncovered_cells": len(lo.uncovered),
            "lam_histogram": {"lower": _lam_histogram(lo), "upper": _lam_histogram(hi)},
        }
    )
    _emit(cfg, _json_payload(payload))
    return EXIT_OK


def _timed(fn) -> tuple[float | str, dict]:
    t0 = time.perf_counter()
    try:
        result = fn()
    except BudgetExceeded as exc:
        return ">budget", {"elapsed_s": round(exc.elapsed_s, 3)}
    dt = time.perf_counter() - t0
    extra = {"h_size": result.size} if result is not None else {}
    return round(dt, 3), extra


def cmd_bench(cfg: RunConfig) -> int:
    problem, _ = _load_problem(cfg, want_table=False)
    g, q, w = problem.graph, problem.query, problem.observation
    space = response_space(g)
    report: dict = {
        "source": cfg.example or cfg.graph,
        "budget_s": cfg.budget_s,
        "workers": cfg.workers,
        "solver": SOLVER_ID,
        "r_count": count_R(g),
        "candidates": candidate_count(g),
    }
    t_h, extra = _timed(lambda: build_pruned(g, q))
    report["direct"] = {"t_s": t_h, **extra}
    t_r, extra = _timed(
        lambda: build_pruned_by_enumeration(
            space, q, r_cap=None, budget_s=cfg.budget_s, workers=cfg.workers
        )
    )
    report["enumeration"] = {"t_s": t_r, **extra}
    if w is not None and w.observed:
        t_ho, extra = _timed(lambda: build_pruned_observed(g, q, w))
        report["direct_observed"] = {"t_s": t_ho, **extra}
        t_ro, extra = _timed(
            lambda: build_pruned_by_enumeration_observed(
                space, q, w, r_cap=None, budget_s=cfg.budget_s, workers=cfg.workers
            )
        )
        report["enumeration_observed"] = {"t_s": t_ro, **extra}
    if isinstance(t_h, float) and isinstance(t_r, float) and t_h > 0:
        report["speedup"] = round(t_r / t_h, 1)
    else:
        report["speedup"] = None
    _emit(cfg, _json_payload(report))
    return EXIT_OK


def cmd_gen(cfg: RunConfig) -> int:
    if cfg.example is None:
        raise ValueError("gen needs a builtin example id")
    if cfg.out is None:
        raise ValueError("gen needs --out (destination directory)")
    problem, table = generate(
        InstanceSpec(cfg.example, cfg.mode, cfg.seed, n_samples=cfg.n_samples)
    )
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    problem_path = out_dir / "problem.json"
    table_path = out_dir / "table.csv"
    problem_path.write_text(problem_to_json(problem) + "\n")
    table_path.write_text(table_to_csv(problem.graph, table))
    sys.stdout.write(
        _json_payload({"problem": str(problem_path), "table": str(table_path)})
    )
    return EXIT_OK


def cmd_probe(cfg: RunConfig) -> int:
    if cfg.seeds is not None:
        if cfg.example is None:
            raise ValueError("batch probe (--seeds) needs a builtin example id")
        ex = builtin_example(cfg.example)
        seeds = range(cfg.seeds)
        if cfg.workers > 1:
            make = _ProbeTableForSeed(cfg.example)
            with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                tables = list(zip(seeds, pool.map(make, seeds)))
        else:
            tables = [(s, random_instance(ex.model, s, "sem-random")) for s in seeds]
        report = probe_batch(ex.graph, ex.query, tables)
        payload = {
            "example": cfg.example.upper(),
            "instances": report.n,
            "fraction_integral": report.fraction_integral,
            "max_deviation": report.max_deviation,
            "worst_seed": report.worst_seed,
        }
        _emit(cfg, _json_payload(payload))
        return EXIT_OK
    problem, table = _load_problem(cfg, want_table=True)
    assert table is not None
    rep = conjecture13_probe(problem.graph, problem.query, table, column_cap=cfg.col_cap)
    payload = {
        "integral": rep.integral,
        "max_deviation": rep.max_deviation,
        "lower_deviation": rep.lower_deviation,
        "upper_deviation": rep.upper_deviation,
        "value_lower": rep.value_lower,
        "value_upper": rep.value_upper,
    }
    _emit(cfg, _json_payload(payload))
    return EXIT_OK


class _ProbeTableForSeed:
    """Picklable seed-to-table mapper for the process pool."""

    def __init__(self, example_id: str):
        self.example_id = example_id

    def __call__(self, seed: int) -> ProbabilityTable:
        return random_instance(builtin_example(self.example_id).model, seed, "sem-random")


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causalbounds",
        description="Bounds on counterfactual queries over binary causal models.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name: str, help_text: str, *, example: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        if example:
            p.add_argument(
                "example",
                nargs="?",
                choices=BUILTIN_IDS,
                type=lambda s: s.strip().upper(),
                default=None,
                help="builtin example id",
            )
        p.add_argument("--graph", help="problem JSON path (alternative to an example id)")
        p.add_argument("--table", help="probability table CSV path")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument(
            "--mode",
            choices=("quadrature", "monte-carlo", "sem-random", "dirichlet-random"),
            default="quadrature",
            help="table generation mode for builtin examples",
        )
        p.add_argument("--n-samples", type=int, default=DEFAULT_MC_SAMPLES)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--r-cap", type=int, default=DEFAULT_R_CAP)
        p.add_argument("--col-cap", type=int, default=DEFAULT_COLUMN_CAP)
        p.add_argument("--budget-s", type=float, default=DEFAULT_BUDGET_S)
        p.add_argument("--out", help="write the result here instead of stdout")
        return p

    add("validate", "check a problem document against the structural assumptions")
    add("stats", "print profile-space, candidate, and valid-table counts")

    p = add("bound", "compute bounds with the selected method")
    p.add_argument(
        "--method",
        choices=("auto", "pruned", "closed-form", "naive", "greedy"),
        default="auto",
    )
    p.add_argument("--delta", type=float, default=0.0, help="finite-sample radius")
    p.add_argument("--conditioned", action="store_true", help="condition on the problem's event")
    p.add_argument("--passes", type=int, default=1)

    p = add("sweep", "bounds over a grid of finite-sample radii (CSV)")
    p.add_argument("--delta-grid", help="comma-separated radii, ascending")
    p.add_argument("--conditioned", action="store_true")

    p = add("greedy", "dual-certificate heuristic (single instance or --seeds batch)")
    p.add_argument("--problem", help="binary pruned-problem dump to reuse")
    p.add_argument("--passes", type=int, default=1)
    p.add_argument("--seeds", type=int, default=None, help="batch size for the quality summary")

    add("bench", "time the direct builder against profile enumeration")
    add("gen", "write a problem JSON and table CSV for a builtin example")

    p = add("probe", "measure LP dual integrality (single instance or --seeds batch)")
    p.add_argument("--seeds", type=int, default=None)
    return parser


_DISPATCH = {
    "validate": cmd_validate,
    "stats": cmd_stats,
    "bound": cmd_bound,
    "sweep": cmd_sweep,
    "greedy": cmd_greedy,
    "bench": cmd_bench,
    "gen": cmd_gen,
    "probe": cmd_probe,
}


def _error_payload(exc: Exception) -> tuple[str, int]:
    for etype, code, status in _ERROR_MAP:
        if isinstance(exc, etype):
            return code, status
    return "invalid-input", EXIT_MODEL


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_args(args)
        return _DISPATCH[cfg.subcommand](cfg)
    except (CausalBoundsError, ValueError, KeyError, OSError) as exc:
        code, status = _error_payload(exc)
        message = str(exc) if not isinstance(exc, KeyError) else str(exc.args[0])
        sys.stderr.write(_json_payload({"error": {"code": code, "message": message}}))
        return status


if __name__ == "__main__":
    sys.exit(main())
