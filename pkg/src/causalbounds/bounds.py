"""Bound computations over the pruned problem: exact, conditioned, finite-data.

All public operations return a :class:`Bounds` record carrying the interval,
the method tag, and size/time diagnostics. Probability tables are dense
``(2^|A|, 2^|B|)`` arrays: entry ``[a_code, b_code]`` is the conditional
probability of the endogenous cell given the context.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import (
    InfeasibleError,
    ObservationImpossible,
    ObservationInvalidatesQuery,
    PreconditionFailed,
)
from .graph import (
    CausalGraph,
    Observation,
    Query,
    critical_for_query,
    reduce_query,
)
from .hyperarcs import (
    PrunedProblem,
    build_pruned,
    build_pruned_observed,
    candidate_count,
)
from .lp import DEFAULT_COLUMN_CAP, REL_EQ, REL_GE, REL_LE, LinearProgram, solve
from .responses import build_naive_fractional_lp, build_naive_lp, count_R, response_space

TABLE_SUM_TOL = 1e-9
BOUND_DRIFT_TOL = 1e-7


# ---------------------------------------------------------------------------
# probability tables


@dataclass(frozen=True)
class ProbabilityTable:
    """Conditional endogenous-cell probabilities per context, optionally with
    a finite-sample radius ``delta`` around the estimates."""

    values: np.ndarray
    delta: float = 0.0

    def __post_init__(self) -> None:
        if self.delta < 0:
            raise ValueError("delta must be non-negative")

    @classmethod
    def from_array(cls, arr, delta: float = 0.0) -> "ProbabilityTable":
        """Validate and exactly renormalize: entries must lie in [0,1] (up to
        1e-12 slack) and every context row must sum to 1 within 1e-9."""
        values = np.asarray(arr, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError("probability table must be two-dimensional")
        if values.min(initial=0.0) < -1e-12 or values.max(initial=0.0) > 1 + 1e-12:
            raise ValueError("probability entries must lie in [0, 1]")
        values = np.clip(values, 0.0, 1.0)
        sums = values.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > TABLE_SUM_TOL):
            worst = float(np.abs(sums - 1.0).max())
            raise ValueError(
                f"context rows must sum to 1 within {TABLE_SUM_TOL:g} (worst |sum-1| = {worst:.3g})"
            )
        return cls(values=values / sums[:, None], delta=float(delta))


def _coerce_table(g: CausalGraph, p) -> np.ndarray:
    values = p.values if isinstance(p, ProbabilityTable) else ProbabilityTable.from_array(p).values
    want = (1 << len(g.a_nodes), 1 << len(g.b_nodes))
    if tuple(values.shape) != want:
        raise ValueError(f"probability table shape {values.shape}, graph needs {want}")
    return values


def _bit_string(code: int, width: int) -> str:
    return "".join("1" if code >> j & 1 else "0" for j in range(width))


def _bit_code(s: str) -> int:
    code = 0
    for j, ch in enumerate(s):
        if ch == "1":
            code |= 1 << j
        elif ch != "0":
            raise ValueError(f"bit string may contain only 0/1, got {s!r}")
    return code


def table_to_csv(g: CausalGraph, p) -> str:
    """Render a table as CSV rows ``v_A bits, v_B bits, p``; character ``j`` of
    a bit string is the value of the j-th block node in index order."""
    values = _coerce_table(g, p)
    n_a, n_b = len(g.a_nodes), len(g.b_nodes)
    out = io.StringIO()
    out.write("v_A bits, v_B bits, p\n")
    for a in range(values.shape[0]):
        for b in range(values.shape[1]):
            out.write(f"{_bit_string(a, n_a)}, {_bit_string(b, n_b)}, {float(values[a, b])!r}\n")
    return out.getvalue()


def table_from_csv(g: CausalGraph, text: str) -> ProbabilityTable:
    """Parse the CSV format written by :func:`table_to_csv`; missing cells
    default to zero, duplicate cells are an error."""
    n_a, n_b = len(g.a_nodes), len(g.b_nodes)
    values = np.zeros((1 << n_a, 1 << n_b))
    seen = np.zeros_like(values, dtype=bool)
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or [t.strip() for t in lines[0].split(",")] != ["v_A bits", "v_B bits", "p"]:
        raise ValueError("table CSV must start with header 'v_A bits, v_B bits, p'")
    for ln in lines[1:]:
        parts = [t.strip() for t in ln.split(",")]
        if len(parts) != 3:
            raise ValueError(f"malformed table row: {ln!r}")
        a_bits, b_bits, val = parts
        if len(a_bits) != n_a or len(b_bits) != n_b:
            raise ValueError(f"bit-string widths must be {n_a} and {n_b}: {ln!r}")
        a, b = _bit_code(a_bits), _bit_code(b_bits)
        if seen[a, b]:
            raise ValueError(f"duplicate cell in table CSV: {ln!r}")
        seen[a, b] = True
        values[a, b] = float(val)
    return ProbabilityTable.from_array(values)


# ---------------------------------------------------------------------------
# bounds record


@dataclass
class Bounds:
    """A two-sided bound with provenance and size diagnostics."""

    lower: float
    upper: float
    method: str  # pruned-lp | closed-form | naive-lp | greedy | finite-data
    h_size: int | None = None
    solve_ms: float = 0.0
    status: str = "optimal"
    r_count: int | None = None
    candidates: int | None = None

    @property
    def width(self) -> float:
        return self.upper - self.lower


def _finalize(lower: float, upper: float, **kwargs) -> Bounds:
    lo = min(max(lower, 0.0), 1.0)
    hi = min(max(upper, 0.0), 1.0)
    if lo > hi:
        if lo - hi > BOUND_DRIFT_TOL:
            raise AssertionError(f"bound inversion beyond tolerance: {lower} > {upper}")
        hi = lo
    return Bounds(lower=lo, upper=hi, **kwargs)


def _diagnostics(g: CausalGraph) -> dict:
    return {"r_count": count_R(g), "candidates": candidate_count(g)}


# ---------------------------------------------------------------------------
# LP assembly over a pruned problem


def _cell_rows(pp: PrunedProblem) -> tuple[np.ndarray, np.ndarray]:
    """(row index, column index) pairs placing every table in its cell row for
    every context; row index is ``a_code * 2^|B| + b_code``."""
    g = pp.graph
    n_ctx, n_b = 1 << len(g.a_nodes), len(g.b_nodes)
    n_cells = 1 << n_b
    cols = np.tile(np.arange(pp.size, dtype=np.int64), n_ctx)
    rows = np.concatenate(
        [
            a * n_cells
            + ((pp.tables >> np.uint64(n_b * (n_ctx - 1 - a))) & np.uint64(n_cells - 1)).astype(np.int64)
            for a in range(n_ctx)
        ]
    )
    return rows, cols


def _assemble_exact(pp: PrunedProblem, values: np.ndarray, sense: str) -> LinearProgram:
    g = pp.graph
    m = values.size
    rows, cols = _cell_rows(pp)
    a_mat = sp.coo_matrix((np.ones(rows.shape[0]), (rows, cols)), shape=(m, pp.size)).tocsr()
    c = (pp.obj_lower if sense == "min" else pp.obj_upper).astype(np.float64)
    return LinearProgram(
        sense=sense,
        c=c,
        a=a_mat,
        rel=np.full(m, REL_EQ, dtype=np.int8),
        rhs=values.reshape(-1),
    )


def _assemble_observed(pp: PrunedProblem, values: np.ndarray, sense: str) -> LinearProgram:
    # columns: one per table plus the trailing scale variable
    m = values.size + 1
    rows, cols = _cell_rows(pp)
    scale_rows = np.arange(values.size, dtype=np.int64)
    norm_cols = np.flatnonzero(pp.in_rw).astype(np.int64)
    a_mat = sp.coo_matrix(
        (
            np.concatenate([np.ones(rows.shape[0]), -values.reshape(-1), np.ones(norm_cols.shape[0])]),
            (
                np.concatenate([rows, scale_rows, np.full(norm_cols.shape[0], m - 1)]),
                np.concatenate([cols, np.full(values.size, pp.size), norm_cols]),
            ),
        ),
        shape=(m, pp.size + 1),
    ).tocsr()
    c = np.zeros(pp.size + 1)
    c[: pp.size] = (pp.obs_lower if sense == "min" else pp.obs_upper).astype(np.float64)
    rhs = np.zeros(m)
    rhs[m - 1] = 1.0
    return LinearProgram(sense=sense, c=c, a=a_mat, rel=np.full(m, REL_EQ, dtype=np.int8), rhs=rhs)


def _assemble_interval(pp: PrunedProblem, values: np.ndarray, delta: float, sense: str) -> LinearProgram:
    n_cells = values.size
    rows, cols = _cell_rows(pp)
    data = np.ones(rows.shape[0])
    # upper-interval rows 0..n_cells-1, lower-interval rows n_cells..2n-1,
    # total-mass row last
    a_mat = sp.coo_matrix(
        (
            np.concatenate([data, data, np.ones(pp.size)]),
            (
                np.concatenate([rows, rows + n_cells, np.full(pp.size, 2 * n_cells)]),
                np.concatenate([cols, cols, np.arange(pp.size, dtype=np.int64)]),
            ),
        ),
        shape=(2 * n_cells + 1, pp.size),
    ).tocsr()
    rel = np.concatenate(
        [
            np.full(n_cells, REL_LE, dtype=np.int8),
            np.full(n_cells, REL_GE, dtype=np.int8),
            np.array([REL_EQ], dtype=np.int8),
        ]
    )
    # The lower interval edge is kept literally, even when it dips below zero.
    rhs = np.concatenate([values.reshape(-1) + delta, values.reshape(-1) - delta, [1.0]])
    c = (pp.obj_lower if sense == "min" else pp.obj_upper).astype(np.float64)
    return LinearProgram(sense=sense, c=c, a=a_mat, rel=rel, rhs=rhs)


def _assemble_interval_observed(
    pp: PrunedProblem, values: np.ndarray, delta: float, sense: str
) -> LinearProgram:
    n_cells = values.size
    rows, cols = _cell_rows(pp)
    data = np.ones(rows.shape[0])
    scale_col = pp.size
    flat = values.reshape(-1)
    norm_cols = np.flatnonzero(pp.in_rw).astype(np.int64)
    coo_rows = np.concatenate(
        [
            rows,                                  # upper-interval rows
            np.arange(n_cells, dtype=np.int64),    # scale in upper rows
            rows + n_cells,                        # lower-interval rows
            np.arange(n_cells, dtype=np.int64) + n_cells,
            np.full(pp.size + 1, 2 * n_cells),     # total mass = scale
            np.full(norm_cols.shape[0], 2 * n_cells + 1),
        ]
    )
    coo_cols = np.concatenate(
        [
            cols,
            np.full(n_cells, scale_col),
            cols,
            np.full(n_cells, scale_col),
            np.concatenate([np.arange(pp.size, dtype=np.int64), [scale_col]]),
            norm_cols,
        ]
    )
    coo_data = np.concatenate(
        [
            data,
            -(flat + delta),
            data,
            -(flat - delta),
            np.concatenate([np.ones(pp.size), [-1.0]]),
            np.ones(norm_cols.shape[0]),
        ]
    )
    a_mat = sp.coo_matrix(
        (coo_data, (coo_rows, coo_cols)), shape=(2 * n_cells + 2, pp.size + 1)
    ).tocsr()
    rel = np.concatenate(
        [
            np.full(n_cells, REL_LE, dtype=np.int8),
            np.full(n_cells, REL_GE, dtype=np.int8),
            np.array([REL_EQ, REL_EQ], dtype=np.int8),
        ]
    )
    rhs = np.zeros(2 * n_cells + 2)
    rhs[-1] = 1.0
    c = np.zeros(pp.size + 1)
    c[: pp.size] = (pp.obs_lower if sense == "min" else pp.obs_upper).astype(np.float64)
    return LinearProgram(sense=sense, c=c, a=a_mat, rel=rel, rhs=rhs)


# ---------------------------------------------------------------------------
# public bound operations


def bounds_pruned(
    g: CausalGraph, q: Query, p, *, column_cap: int | None = DEFAULT_COLUMN_CAP
) -> Bounds:
    """Two LP solves over the valid arc tables (exact cell equalities)."""
    values = _coerce_table(g, p)
    pp = build_pruned(g, q, values)
    return bounds_from_pruned(pp, values, column_cap=column_cap)


def bounds_from_pruned(
    pp: PrunedProblem, p, *, column_cap: int | None = DEFAULT_COLUMN_CAP
) -> Bounds:
    """Solve the exact LPs for an already-constructed pruned problem."""
    values = _coerce_table(pp.graph, p)
    lo = solve(_assemble_exact(pp, values, "min"), column_cap=column_cap)
    hi = solve(_assemble_exact(pp, values, "max"), column_cap=column_cap)
    return _finalize(
        lo.value,
        hi.value,
        method="pruned-lp",
        h_size=pp.size,
        solve_ms=lo.solve_ms + hi.solve_ms,
        **_diagnostics(pp.graph),
    )


def bounds_naive(
    g: CausalGraph,
    q: Query,
    p,
    *,
    r_cap: int | None = 10**6,
    column_cap: int | None = DEFAULT_COLUMN_CAP,
) -> Bounds:
    """Ground-truth bounds from the profile-space LPs (verification scale only)."""
    values = _coerce_table(g, p)
    space = response_space(g)
    lo = solve(build_naive_lp(space, q, values, "min", r_cap=r_cap), column_cap=column_cap)
    hi = solve(build_naive_lp(space, q, values, "max", r_cap=r_cap), column_cap=column_cap)
    return _finalize(
        lo.value,
        hi.value,
        method="naive-lp",
        h_size=None,
        solve_ms=lo.solve_ms + hi.solve_ms,
        **_diagnostics(g),
    )


def bounds_naive_with_observation(
    g: CausalGraph,
    q: Query,
    w: Observation,
    p,
    *,
    r_cap: int | None = 10**6,
    column_cap: int | None = DEFAULT_COLUMN_CAP,
) -> Bounds:
    """Conditioned ground truth via the linearized ratio program over profiles."""
    values = _coerce_table(g, p)
    space = response_space(g)
    lo = solve(
        build_naive_fractional_lp(space, q, w, values, "min", r_cap=r_cap), column_cap=column_cap
    )
    hi = solve(
        build_naive_fractional_lp(space, q, w, values, "max", r_cap=r_cap), column_cap=column_cap
    )
    return _finalize(
        lo.value,
        hi.value,
        method="naive-lp",
        h_size=None,
        solve_ms=lo.solve_ms + hi.solve_ms,
        **_diagnostics(g),
    )


def bounds_closed_form(
    g: CausalGraph, q: Query, p, *, require_critical: bool = True
) -> Bounds:
    """No-LP bounds for queries whose context block is entirely critical:
    lower = mass of cells matching the intervention and the outcome at the
    query context; upper = 1 minus the mass matching the intervention with a
    different outcome.

    ``require_critical=False`` skips the precondition and evaluates the same
    formula anyway (callers then own the validity question)."""
    values = _coerce_table(g, p)
    q = reduce_query(g, q)
    if require_critical:
        crit = critical_for_query(g, q)
        missing = g.a_mask & ~crit
        if missing:
            idx = [i for i in range(g.n) if missing >> i & 1]
            names = [g.names[i] for i in idx]
            raise PreconditionFailed(
                f"context nodes {names} (indices {idx}) cannot influence the outcome; "
                "the closed form requires every context node to be critical"
            )
    qa = g.a_code(q.context.values)
    cells = np.arange(values.shape[1], dtype=np.int64)
    i_mask, i_vals = g.b_code(q.intervene.scope), g.b_code(q.intervene.values)
    o_mask, o_vals = g.b_code(q.outcome.scope), g.b_code(q.outcome.values)
    i_hit = (cells & i_mask) == i_vals
    o_hit = (cells & o_mask) == o_vals
    lower = float(values[qa, i_hit & o_hit].sum())
    upper = 1.0 - float(values[qa, i_hit & ~o_hit].sum())
    return _finalize(
        lower, upper, method="closed-form", h_size=None, solve_ms=0.0, **_diagnostics(g)
    )


def _require_witness(pp: PrunedProblem) -> None:
    """The conditioned upper objective has a 1 iff some profile satisfies both
    the query and the observed event; with none, the conditioned query is
    vacuous and reported distinctly."""
    if not np.any(pp.obs_upper == 1):
        raise ObservationInvalidatesQuery(
            "the observed event excludes every query-consistent response profile"
        )


def bounds_with_observation(
    g: CausalGraph,
    q: Query,
    w: Observation,
    p,
    *,
    column_cap: int | None = DEFAULT_COLUMN_CAP,
) -> Bounds:
    """Conditioned bounds via the scale-variable (homogenized) LPs."""
    values = _coerce_table(g, p)
    pp = build_pruned_observed(g, q, w, values)
    return bounds_from_pruned_observed(pp, values, column_cap=column_cap)


def bounds_from_pruned_observed(
    pp: PrunedProblem, p, *, column_cap: int | None = DEFAULT_COLUMN_CAP
) -> Bounds:
    values = _coerce_table(pp.graph, p)
    _require_witness(pp)
    try:
        lo = solve(_assemble_observed(pp, values, "min"), column_cap=column_cap)
        hi = solve(_assemble_observed(pp, values, "max"), column_cap=column_cap)
    except InfeasibleError as exc:
        raise ObservationImpossible(
            "no model matching the table gives the observed event positive probability"
        ) from exc
    return _finalize(
        lo.value,
        hi.value,
        method="pruned-lp",
        h_size=pp.size,
        solve_ms=lo.solve_ms + hi.solve_ms,
        **_diagnostics(pp.graph),
    )


def bounds_finite_data(
    g: CausalGraph,
    q: Query,
    p,
    delta: float,
    *,
    column_cap: int | None = DEFAULT_COLUMN_CAP,
) -> Bounds:
    """Interval-constrained bounds: cell masses within ±delta of the estimates,
    total mass pinned to 1."""
    values = _coerce_table(g, p)
    if delta < 0:
        raise ValueError("delta must be non-negative")
    pp = build_pruned(g, q, values)
    return _finite_from_pruned(pp, values, delta, column_cap=column_cap)


def _finite_from_pruned(
    pp: PrunedProblem, values: np.ndarray, delta: float, *, column_cap: int | None
) -> Bounds:
    lo = solve(_assemble_interval(pp, values, delta, "min"), column_cap=column_cap)
    hi = solve(_assemble_interval(pp, values, delta, "max"), column_cap=column_cap)
    return _finalize(
        lo.value,
        hi.value,
        method="finite-data",
        h_size=pp.size,
        solve_ms=lo.solve_ms + hi.solve_ms,
        **_diagnostics(pp.graph),
    )


def bounds_finite_data_with_observation(
    g: CausalGraph,
    q: Query,
    w: Observation,
    p,
    delta: float,
    *,
    column_cap: int | None = DEFAULT_COLUMN_CAP,
) -> Bounds:
    """Interval constraints scaled by the free total mass, with the observed
    event pinned to 1."""
    values = _coerce_table(g, p)
    if delta < 0:
        raise ValueError("delta must be non-negative")
    pp = build_pruned_observed(g, q, w, values)
    return _finite_obs_from_pruned(pp, values, delta, column_cap=column_cap)


def _finite_obs_from_pruned(
    pp: PrunedProblem, values: np.ndarray, delta: float, *, column_cap: int | None
) -> Bounds:
    _require_witness(pp)
    try:
        lo = solve(_assemble_interval_observed(pp, values, delta, "min"), column_cap=column_cap)
        hi = solve(_assemble_interval_observed(pp, values, delta, "max"), column_cap=column_cap)
    except InfeasibleError as exc:
        raise ObservationImpossible(
            "no model matching the table gives the observed event positive probability"
        ) from exc
    return _finalize(
        lo.value,
        hi.value,
        method="finite-data",
        h_size=pp.size,
        solve_ms=lo.solve_ms + hi.solve_ms,
        **_diagnostics(pp.graph),
    )


# ---------------------------------------------------------------------------
# delta sweep


@dataclass
class SweepPoint:
    delta: float
    lower: float
    upper: float
    status: str


def delta_sweep(
    g: CausalGraph,
    q: Query,
    w: Observation | None,
    p,
    delta_grid,
    *,
    column_cap: int | None = DEFAULT_COLUMN_CAP,
) -> list[SweepPoint]:
    """Per-delta finite-data bounds over a sorted grid. The pruned problem is
    constructed once; a failing grid point records its error and the sweep
    continues."""
    values = _coerce_table(g, p)
    grid = [float(d) for d in delta_grid]
    if grid != sorted(grid):
        raise ValueError("delta grid must be sorted ascending")
    pp = (
        build_pruned_observed(g, q, w, values)
        if w is not None
        else build_pruned(g, q, values)
    )
    out: list[SweepPoint] = []
    for d in grid:
        try:
            if w is not None:
                b = _finite_obs_from_pruned(pp, values, d, column_cap=column_cap)
            else:
                b = _finite_from_pruned(pp, values, d, column_cap=column_cap)
            out.append(SweepPoint(delta=d, lower=b.lower, upper=b.upper, status="optimal"))
        except Exception as exc:  # per-point failure is data, not control flow
            out.append(SweepPoint(delta=d, lower=float("nan"), upper=float("nan"), status=type(exc).__name__))
    return out


def sweep_to_csv(points: list[SweepPoint]) -> str:
    lines = ["delta, lower, upper, status"]
    for pt in points:
        lines.append(f"{pt.delta!r}, {pt.lower!r}, {pt.upper!r}, {pt.status}")
    return "\n".join(lines) + "\n"
