"""Greedy dual heuristic and the dual-integrality probe.

The exact LPs become unsolvable when the number of valid arc tables reaches
millions; any feasible point of the *dual* program still certifies a one-sided
bound. The heuristic starts from the trivially feasible constant dual vector
and greedily tightens it one cell at a time, visiting cells in descending
probability order, which keeps the certificate valid at every step.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np

from .bounds import Bounds, _assemble_exact, _coerce_table
from .errors import DimensionMismatch, InfeasibleError, PreconditionFailed
from .graph import CausalGraph, Query
from .hyperarcs import PrunedProblem, build_pruned, candidate_count
from .lp import DEFAULT_COLUMN_CAP, solve
from .responses import count_R

UNCOVERED_MASS_TOL = 1e-9
INTEGRALITY_TOL = 1e-6


def _context_tables(pp: PrunedProblem) -> list[np.ndarray]:
    """Per-context cell codes, one compact array per context row."""
    g = pp.graph
    n_b = len(g.b_nodes)
    n_ctx = 1 << len(g.a_nodes)
    mask = np.uint64((1 << n_b) - 1)
    dtype = np.uint8 if n_b <= 8 else (np.uint16 if n_b <= 16 else np.uint32)
    return [
        ((pp.tables >> np.uint64(n_b * (n_ctx - 1 - a))) & mask).astype(dtype)
        for a in range(n_ctx)
    ]


@dataclass
class GreedyRun:
    """One greedy pass result: certified value, final dual vector, and trace."""

    value: float
    lam: np.ndarray          # (2^|A|, 2^|B|) integer dual values per cell
    steps: int               # accepted unit steps across all cells and passes
    uncovered: list[tuple[int, int]]
    sense: str
    passes: int
    elapsed_ms: float


def greedy_run(pp: PrunedProblem, p, sense: str = "lower", passes: int = 1) -> GreedyRun:
    """Tighten the constant dual vector cell by cell in descending-probability
    order (ties broken by ascending cell position).

    For the lower sense the dual starts at -1 everywhere and each visited cell
    absorbs the largest increment that keeps every per-table sum at or below
    that table's lower objective coefficient; the upper sense mirrors this with
    +1, decrements, and an at-or-above test. Cells no valid table can produce
    are pinned to 0 (with a warning when they carry mass) so the certificate
    stays finite.
    """
    if sense not in ("lower", "upper"):
        raise ValueError(f"sense must be 'lower' or 'upper', got {sense!r}")
    if passes < 1:
        raise ValueError("passes must be at least 1")
    if pp.observation is not None:
        raise PreconditionFailed(
            "the greedy heuristic bounds unconditioned queries only"
        )
    t0 = time.perf_counter()
    g = pp.graph
    values = _coerce_table(g, p)
    n_ctx, n_cells = values.shape
    rows = _context_tables(pp)
    lower = sense == "lower"
    coeff = (pp.obj_lower if lower else pp.obj_upper).astype(np.int16)
    sums = np.full(pp.size, -n_ctx if lower else n_ctx, dtype=np.int16)
    lam = np.full((n_ctx, n_cells), -1 if lower else 1, dtype=np.int64)

    order = np.argsort(-values.ravel(), kind="stable")
    steps = 0
    uncovered: list[tuple[int, int]] = []
    pinned = np.zeros((n_ctx, n_cells), dtype=bool)
    for pass_idx in range(passes):
        for flat in order:
            a, b = divmod(int(flat), n_cells)
            if pinned[a, b]:
                continue
            affected = rows[a] == b
            if not affected.any():
                lam[a, b] = 0
                pinned[a, b] = True
                uncovered.append((a, b))
                if values[a, b] > UNCOVERED_MASS_TOL and pass_idx == 0:
                    warnings.warn(
                        f"cell (context {a}, outcome {b}) carries probability "
                        f"{values[a, b]:.3g} but no valid arc table produces it; "
                        "its dual value is pinned to 0",
                        stacklevel=2,
                    )
                continue
            if lower:
                k = int((coeff[affected] - sums[affected]).min())
            else:
                k = int((sums[affected] - coeff[affected]).min())
            if k > 0:
                lam[a, b] += k if lower else -k
                sums[affected] += k if lower else -k
                steps += k

    ok, violated = feasibility_check(lam, pp, sense)
    if not ok:  # pragma: no cover - guarded by construction
        raise AssertionError(f"greedy returned an infeasible dual (table {violated})")
    value = float(values.ravel() @ lam.ravel())
    return GreedyRun(
        value=value,
        lam=lam,
        steps=steps,
        uncovered=uncovered,
        sense=sense,
        passes=passes,
        elapsed_ms=(time.perf_counter() - t0) * 1e3,
    )


def greedy_lower(pp: PrunedProblem, p) -> tuple[float, np.ndarray]:
    """Certified lower bound: any dual vector feasible for the minimization's
    dual under-estimates the true optimum."""
    run = greedy_run(pp, p, sense="lower")
    return run.value, run.lam


def greedy_upper(pp: PrunedProblem, p) -> tuple[float, np.ndarray]:
    """Certified upper bound, mirror image of :func:`greedy_lower`."""
    run = greedy_run(pp, p, sense="upper")
    return run.value, run.lam


def feasibility_check(lam, pp: PrunedProblem, sense: str) -> tuple[bool, int | None]:
    """Recompute every per-table dual sum from scratch; return whether the
    sense's inequality holds for all tables and, if not, the encoding of the
    first violating table."""
    g = pp.graph
    n_ctx, n_cells = 1 << len(g.a_nodes), 1 << len(g.b_nodes)
    lam = np.asarray(lam)
    if lam.shape != (n_ctx, n_cells):
        raise DimensionMismatch(
            f"dual vector shape {lam.shape}, problem needs {(n_ctx, n_cells)}"
        )
    rows = _context_tables(pp)
    sums = np.zeros(pp.size, dtype=np.float64)
    for a in range(n_ctx):
        sums += lam[a][rows[a].astype(np.int64)]
    if sense == "lower":
        bad = sums > pp.obj_lower
    elif sense == "upper":
        bad = sums < pp.obj_upper
    else:
        raise ValueError(f"sense must be 'lower' or 'upper', got {sense!r}")
    if bad.any():
        return False, int(pp.tables[int(np.argmax(bad))])
    return True, None


def greedy_bounds(pp: PrunedProblem, p, passes: int = 1) -> Bounds:
    """Both greedy certificates packaged like the LP results.

    Crossed certificates (lower above upper, or an upper certificate below 0)
    prove that no model reproduces the table, which is reported as
    infeasibility rather than a bound.
    """
    lo = greedy_run(pp, p, sense="lower", passes=passes)
    hi = greedy_run(pp, p, sense="upper", passes=passes)
    return runs_to_bounds(pp, lo, hi)


def runs_to_bounds(pp: PrunedProblem, lo: GreedyRun, hi: GreedyRun) -> Bounds:
    """Package an existing certificate pair, applying the same crossing check
    and clamping as :func:`greedy_bounds`."""
    if lo.value > hi.value + 1e-9 or hi.value < -1e-9 or lo.value > 1 + 1e-9:
        raise InfeasibleError(
            "greedy dual certificates cross: the table is incompatible with the graph"
        )
    return Bounds(
        lower=min(max(lo.value, 0.0), 1.0),
        upper=min(max(hi.value, 0.0), 1.0),
        method="greedy",
        h_size=pp.size,
        solve_ms=lo.elapsed_ms + hi.elapsed_ms,
        r_count=count_R(pp.graph),
        candidates=candidate_count(pp.graph),
    )


# ---------------------------------------------------------------------------
# dual-integrality probe


@dataclass
class ProbeReport:
    """How close one instance's optimal cell duals come to {-1, 0, 1}."""

    integral: bool
    max_deviation: float
    lower_deviation: float
    upper_deviation: float
    value_lower: float
    value_upper: float


@dataclass
class BatchProbeReport:
    n: int
    fraction_integral: float
    max_deviation: float
    worst_seed: int | None


def _integrality_deviation(duals: np.ndarray) -> float:
    if duals.size == 0:
        return 0.0
    dist = np.abs(duals[:, None] - np.array([-1.0, 0.0, 1.0])).min(axis=1)
    return float(dist.max())


def conjecture13_probe(
    g: CausalGraph,
    q: Query,
    p,
    *,
    tol: float = INTEGRALITY_TOL,
    column_cap: int | None = DEFAULT_COLUMN_CAP,
) -> ProbeReport:
    """Solve both exact LPs and measure how far the returned optimal cell
    duals stray from {-1, 0, 1}. Purely observational: the integrality claim
    is an open conjecture, so nothing here asserts."""
    values = _coerce_table(g, p)
    pp = build_pruned(g, q, values)
    lo = solve(_assemble_exact(pp, values, "min"), column_cap=column_cap)
    hi = solve(_assemble_exact(pp, values, "max"), column_cap=column_cap)
    dev_lo = _integrality_deviation(lo.duals)
    dev_hi = _integrality_deviation(hi.duals)
    return ProbeReport(
        integral=max(dev_lo, dev_hi) <= tol,
        max_deviation=max(dev_lo, dev_hi),
        lower_deviation=dev_lo,
        upper_deviation=dev_hi,
        value_lower=lo.value,
        value_upper=hi.value,
    )


def probe_batch(
    g: CausalGraph,
    q: Query,
    tables,
    *,
    tol: float = INTEGRALITY_TOL,
) -> BatchProbeReport:
    """Aggregate the probe over ``(seed, table)`` pairs."""
    devs: list[tuple[float, int]] = []
    hits = 0
    for seed, p in tables:
        report = conjecture13_probe(g, q, p, tol=tol)
        devs.append((report.max_deviation, seed))
        hits += int(report.integral)
    if not devs:
        return BatchProbeReport(n=0, fraction_integral=1.0, max_deviation=0.0, worst_seed=None)
    worst = max(devs)
    return BatchProbeReport(
        n=len(devs),
        fraction_integral=hits / len(devs),
        max_deviation=worst[0],
        worst_seed=worst[1],
    )
