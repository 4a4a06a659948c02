"""Brute-force ground truth over the full response-profile space.

A *response profile* fixes, for every endogenous node, one deterministic
function from its parent values to {0,1}. Profiles are indexed by a
mixed-radix integer: the component for node ``j`` ranges over
``2^(2^|pa(j)|)`` function choices, with the first endogenous node in index
order as the least-significant component. Component value ``r_j`` encodes the
truth table of the node's function: on parent pattern ``pi`` (binary rank over
the node's parents in ascending index order) the node takes bit
``(r_j >> pi) & 1``.

Everything here is Theta(|R|) by design: it exists to verify the pruned
constructions and to serve as the timing baseline, not to scale. The
vectorized helpers back the naive LP builders; the per-profile enumeration
builders (`build_pruned_by_enumeration*`) intentionally walk profiles one at a
time, exactly following the reference update rules, so their wall time is an
honest baseline.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import BudgetExceeded, CapExceeded, ObservationInvalidatesQuery
from .graph import Assignment, CausalGraph, Observation, Query, validate_graph
from .hyperarcs import Hyperarc, PrunedProblem, is_valid, iter_valid_encoding_chunks
from .lp import REL_EQ, LinearProgram

DEFAULT_R_CAP = 10**6
_BUDGET_STRIDE = 4096  # budget clock checked every this many profiles


@dataclass(frozen=True)
class ResponseSpace:
    """The profile space of a validated graph: per-endogenous-node radices
    (aligned with ``graph.b_nodes``) and the exact total count."""

    graph: CausalGraph
    radices: tuple[int, ...]
    size: int


def response_space(g: CausalGraph) -> ResponseSpace:
    validate_graph(g)
    radices = tuple(1 << (1 << len(g.parents[j])) for j in g.b_nodes)
    size = 1
    for radix in radices:
        size *= radix
    return ResponseSpace(graph=g, radices=radices, size=size)


def count_R(g: CausalGraph) -> int:
    """Exact number of response profiles: product of 2^(2^|pa(j)|) over B."""
    return response_space(g).size


def decode_response(space: ResponseSpace, r: int) -> tuple[int, ...]:
    if not 0 <= r < space.size:
        raise ValueError(f"profile index {r} outside 0..{space.size - 1}")
    comps = []
    for radix in space.radices:
        comps.append(r % radix)
        r //= radix
    return tuple(comps)


def encode_response(space: ResponseSpace, comps) -> int:
    comps = tuple(comps)
    if len(comps) != len(space.radices):
        raise ValueError("one component required per endogenous node")
    r = 0
    for comp, radix in zip(reversed(comps), reversed(space.radices)):
        if not 0 <= comp < radix:
            raise ValueError(f"component {comp} outside its radix {radix}")
        r = r * radix + comp
    return r


# ---------------------------------------------------------------------------
# scalar evaluation


def _eval_plan(g: CausalGraph):
    """(node, parent index tuple) per endogenous node, in index order."""
    return [(node, g.parents[node]) for node in g.b_nodes]


def _eval_values(
    space: ResponseSpace,
    a_values: int,
    comps,
    clamp_scope: int = 0,
    clamp_values: int = 0,
) -> int:
    """Full value bitmask over all nodes for one profile in one context,
    with optional clamping of endogenous nodes (their functions are ignored)."""
    g = space.graph
    val = a_values & g.a_mask
    for k, (node, pa) in enumerate(_eval_plan(g)):
        if clamp_scope >> node & 1:
            bit = clamp_values >> node & 1
        else:
            rank = 0
            for kk, p in enumerate(pa):
                rank |= (val >> p & 1) << kk
            bit = comps[k] >> rank & 1
        val |= bit << node
    return val


def evaluate_FB(space: ResponseSpace, v_a: Assignment, r) -> Assignment:
    """Observational evaluation: values of all endogenous nodes given a full
    context assignment and a profile (packed index or component tuple)."""
    g = space.graph
    if v_a.scope != g.a_mask:
        raise ValueError("context assignment must cover every context node")
    comps = decode_response(space, r) if isinstance(r, int) else tuple(r)
    val = _eval_values(space, v_a.values, comps)
    return Assignment(g.b_mask, val & g.b_mask)


def evaluate_intervened(
    space: ResponseSpace, v_a: Assignment, intervene: Assignment, r
) -> Assignment:
    """Interventional evaluation: clamped nodes take the given values and
    their response functions are ignored; all other nodes evaluate normally."""
    g = space.graph
    if v_a.scope != g.a_mask:
        raise ValueError("context assignment must cover every context node")
    if intervene.scope & ~g.b_mask:
        raise ValueError("can only clamp endogenous nodes")
    comps = decode_response(space, r) if isinstance(r, int) else tuple(r)
    val = _eval_values(space, v_a.values, comps, intervene.scope, intervene.values)
    return Assignment(g.b_mask, val & g.b_mask)


@dataclass(frozen=True)
class Membership:
    """Consistency flags of one profile: with the query, with the observed
    event (None when no event is given), and the endogenous cell the profile
    produces in every context (``cells[a_code]`` is a b_code)."""

    in_rq: bool
    in_rw: bool | None
    cells: tuple[int, ...]


def membership(
    space: ResponseSpace, q: Query, w: Observation | None, r
) -> Membership:
    g = space.graph
    comps = decode_response(space, r) if isinstance(r, int) else tuple(r)
    out = evaluate_intervened(space, q.context, q.intervene, comps)
    in_rq = out.restrict(q.outcome.scope) == q.outcome
    obs = evaluate_FB(space, q.context, comps)
    in_rw = None
    if w is not None:
        in_rw = obs.restrict(w.observed.scope) == w.observed
    cells = []
    for a_code in range(1 << len(g.a_nodes)):
        ctx = Assignment(g.a_mask, g.mask_from_a_code(a_code))
        cells.append(g.b_code(evaluate_FB(space, ctx, comps).values))
    return Membership(in_rq=in_rq, in_rw=in_rw, cells=tuple(cells))


# ---------------------------------------------------------------------------
# vectorized evaluation (backs the naive LP builders and partition check)


def _require_within_cap(space: ResponseSpace, r_cap: int | None) -> int:
    if r_cap is not None and space.size > r_cap:
        raise CapExceeded(space.size, r_cap, what="response profiles")
    return int(space.size)

def _component_arrays(space: ResponseSpace, total: int) -> list[np.ndarray]:
    comps = []
    stride = 1
    idx = np.arange(total, dtype=np.int64)
    for radix in space.radices:
        comps.append((idx // stride) % radix)
        stride *= radix
    return comps


def _eval_codes(
    space: ResponseSpace,
    comps: list[np.ndarray],
    a_code: int,
    clamp_scope: int = 0,
    clamp_values: int = 0,
) -> np.ndarray:
    """b_codes of every profile in one context (vectorized _eval_values)."""
    g = space.graph
    a_values = g.mask_from_a_code(a_code)
    vals: dict[int, object] = {node: a_values >> node & 1 for node in g.a_nodes}
    code = np.zeros(comps[0].shape[0], dtype=np.int64) if comps else None
    for k, (node, pa) in enumerate(_eval_plan(g)):
        if clamp_scope >> node & 1:
            bit = clamp_values >> node & 1
            vals[node] = bit
            if bit:
                code = code | (1 << k)
        else:
            rank = 0
            for kk, p in enumerate(pa):
                rank = rank + (vals[p] << kk if isinstance(vals[p], int) else np.left_shift(vals[p], kk))
            bit_arr = (comps[k] >> rank) & 1
            vals[node] = bit_arr
            code = code | (bit_arr << k)
    return code


def _in_rq_array(space: ResponseSpace, q: Query, comps: list[np.ndarray]) -> np.ndarray:
    g = space.graph
    qa = g.a_code(q.context.values)
    out = _eval_codes(space, comps, qa, q.intervene.scope, q.intervene.values)
    o_mask, o_vals = g.b_code(q.outcome.scope), g.b_code(q.outcome.values)
    return (out & o_mask) == o_vals


def _in_rw_array(
    space: ResponseSpace, q: Query, w: Observation, comps: list[np.ndarray]
) -> np.ndarray:
    g = space.graph
    qa = g.a_code(q.context.values)
    obs = _eval_codes(space, comps, qa)
    w_mask, w_vals = g.b_code(w.observed.scope), g.b_code(w.observed.values)
    return (obs & w_mask) == w_vals


def build_naive_lp(
    space: ResponseSpace,
    q: Query,
    p: np.ndarray,
    sense: str,
    r_cap: int | None = DEFAULT_R_CAP,
) -> LinearProgram:
    """Definition-level program over profile mass: one variable per profile,
    one equality per (context, endogenous-cell) pair, objective = mass of
    query-consistent profiles."""
    g = space.graph
    total = _require_within_cap(space, r_cap)
    n_ctx, n_cells = 1 << len(g.a_nodes), 1 << len(g.b_nodes)
    if tuple(p.shape) != (n_ctx, n_cells):
        raise ValueError(f"probability table shape {p.shape}, need {(n_ctx, n_cells)}")
    comps = _component_arrays(space, total)
    cols = np.tile(np.arange(total, dtype=np.int64), n_ctx)
    rows = np.concatenate(
        [a * n_cells + _eval_codes(space, comps, a) for a in range(n_ctx)]
    )
    a_mat = sp.coo_matrix(
        (np.ones(rows.shape[0]), (rows, cols)), shape=(n_ctx * n_cells, total)
    ).tocsr()
    c = _in_rq_array(space, q, comps).astype(np.float64)
    return LinearProgram(
        sense=sense,
        c=c,
        a=a_mat,
        rel=np.full(n_ctx * n_cells, REL_EQ, dtype=np.int8),
        rhs=p.reshape(-1).astype(np.float64),
    )


def build_naive_fractional_lp(
    space: ResponseSpace,
    q: Query,
    w: Observation,
    p: np.ndarray,
    sense: str,
    r_cap: int | None = DEFAULT_R_CAP,
) -> LinearProgram:
    """Conditioned variant after the standard ratio-to-linear substitution:
    profile variables plus one scale variable, cell rows become
    ``mass(cell) - scale * p(cell) = 0``, the observed-event mass is pinned to
    1, and the objective is the mass of profiles consistent with both the
    query and the observed event."""
    g = space.graph
    total = _require_within_cap(space, r_cap)
    n_ctx, n_cells = 1 << len(g.a_nodes), 1 << len(g.b_nodes)
    if tuple(p.shape) != (n_ctx, n_cells):
        raise ValueError(f"probability table shape {p.shape}, need {(n_ctx, n_cells)}")
    comps = _component_arrays(space, total)
    in_rq = _in_rq_array(space, q, comps)
    in_rw = _in_rw_array(space, q, w, comps)
    if not np.any(in_rq & in_rw):
        raise ObservationInvalidatesQuery(
            "no response profile is consistent with both the query and the observed event"
        )

    m = n_ctx * n_cells + 1
    cols = np.tile(np.arange(total, dtype=np.int64), n_ctx)
    rows = np.concatenate(
        [a * n_cells + _eval_codes(space, comps, a) for a in range(n_ctx)]
    )
    data = np.ones(rows.shape[0])
    # scale column: -p(cell) on every cell row
    scale_rows = np.arange(n_ctx * n_cells, dtype=np.int64)
    scale_data = -p.reshape(-1).astype(np.float64)
    # normalization row: observed-event profiles sum to 1
    norm_cols = np.flatnonzero(in_rw).astype(np.int64)
    a_mat = sp.coo_matrix(
        (
            np.concatenate([data, scale_data, np.ones(norm_cols.shape[0])]),
            (
                np.concatenate([rows, scale_rows, np.full(norm_cols.shape[0], m - 1)]),
                np.concatenate([cols, np.full(n_ctx * n_cells, total), norm_cols]),
            ),
        ),
        shape=(m, total + 1),
    ).tocsr()
    c = np.zeros(total + 1)
    c[: total][in_rq & in_rw] = 1.0
    rhs = np.zeros(m)
    rhs[m - 1] = 1.0
    return LinearProgram(
        sense=sense, c=c, a=a_mat, rel=np.full(m, REL_EQ, dtype=np.int8), rhs=rhs
    )


# ---------------------------------------------------------------------------
# per-profile enumeration builders (timing baselines)


def _enc_shifts(g: CausalGraph) -> list[int]:
    n_ctx = 1 << len(g.a_nodes)
    n_b = len(g.b_nodes)
    return [n_b * (n_ctx - 1 - a) for a in range(n_ctx)]


def _enumerate_range(
    space: ResponseSpace,
    q: Query,
    w: Observation | None,
    start: int,
    stop: int,
    t0: float,
    budget_s: float | None,
    total: int,
) -> dict[int, list]:
    """Walk profiles ``start..stop-1`` with an odometer, bucketing by induced
    arc table and applying the reference coefficient update rules per profile.

    Each step calls the public :func:`membership` oracle — one observational
    evaluation per context plus one interventional evaluation — keeping the
    walk a faithful Theta(|R|) baseline rather than a fused fast path.

    Bucket entry layout: [count, c_lower, c_upper] extended by
    [w_lower, w_upper] when an observed event is given (the raw all/any flags
    before conditioning)."""
    radices = space.radices
    shifts = _enc_shifts(space.graph)

    comps = list(decode_response(space, start))
    buckets: dict[int, list] = {}
    r = start
    while r < stop:
        if budget_s is not None and (r - start) % _BUDGET_STRIDE == 0:
            elapsed = time.perf_counter() - t0
            if elapsed > budget_s:
                raise BudgetExceeded(elapsed, budget_s, progress=(r - start) / max(total, 1))

        m = membership(space, q, w, tuple(comps))
        enc = 0
        for a, cell in enumerate(m.cells):
            enc |= cell << shifts[a]

        entry = buckets.get(enc)
        if entry is None:
            entry = [0, 1, 0] if w is None else [0, 1, 0, 1, 0]
            buckets[enc] = entry
        entry[0] += 1
        if entry[1] == 1 and not m.in_rq:
            entry[1] = 0
        if entry[2] == 0 and m.in_rq:
            entry[2] = 1
        if w is not None:
            if entry[3] == 1 and not m.in_rw:
                entry[3] = 0
            if entry[4] == 0 and m.in_rw:
                entry[4] = 1

        # odometer increment
        r += 1
        if r < stop:
            j = 0
            while True:
                comps[j] += 1
                if comps[j] == radices[j]:
                    comps[j] = 0
                    j += 1
                else:
                    break
    return buckets


def _merge_buckets(parts: list[dict[int, list]], observed: bool) -> dict[int, list]:
    merged: dict[int, list] = {}
    for part in parts:
        for enc, entry in part.items():
            cur = merged.get(enc)
            if cur is None:
                merged[enc] = list(entry)
                continue
            cur[0] += entry[0]
            cur[1] = min(cur[1], entry[1])  # all-profiles flag
            cur[2] = max(cur[2], entry[2])  # any-profile flag
            if observed:
                cur[3] = min(cur[3], entry[3])
                cur[4] = max(cur[4], entry[4])
    return merged


def build_pruned_by_enumeration(
    space: ResponseSpace,
    q: Query,
    p: np.ndarray | None = None,
    *,
    r_cap: int | None = DEFAULT_R_CAP,
    budget_s: float | None = None,
    workers: int = 1,
) -> PrunedProblem:
    """Timing-baseline construction: iterate every response profile, bucket by
    induced arc table, and down/upgrade the coefficient flags per profile."""
    return _build_by_enumeration(space, q, None, p, r_cap, budget_s, workers)


def build_pruned_by_enumeration_observed(
    space: ResponseSpace,
    q: Query,
    w: Observation,
    p: np.ndarray | None = None,
    *,
    r_cap: int | None = DEFAULT_R_CAP,
    budget_s: float | None = None,
    workers: int = 1,
) -> PrunedProblem:
    """Observed-event variant: additionally tracks per-table all/any
    observation flags, then conditions the coefficients per table."""
    return _build_by_enumeration(space, q, w, p, r_cap, budget_s, workers)


def _build_by_enumeration(
    space: ResponseSpace,
    q: Query,
    w: Observation | None,
    p: np.ndarray | None,
    r_cap: int | None,
    budget_s: float | None,
    workers: int,
) -> PrunedProblem:
    g = space.graph
    total = _require_within_cap(space, r_cap)
    if p is not None:
        want = (1 << len(g.a_nodes), 1 << len(g.b_nodes))
        if tuple(p.shape) != want:
            raise ValueError(f"probability table shape {p.shape}, need {want}")
    if workers < 1:
        raise ValueError("workers must be >= 1")

    t0 = time.perf_counter()
    # Contiguous ranges merge commutatively, so the result is independent of
    # the partitioning. Ranges are processed in-process (the work is CPU-bound
    # pure Python; the partitioning exists for distribution, not threading).
    edges = [total * i // workers for i in range(workers + 1)]
    parts = [
        _enumerate_range(space, q, w, lo, hi, t0, budget_s, total)
        for lo, hi in zip(edges, edges[1:])
        if lo < hi
    ]
    buckets = _merge_buckets(parts, observed=w is not None)

    encs = np.array(sorted(buckets), dtype=np.uint64)
    order = [int(e) for e in encs]
    counts = np.array([buckets[e][0] for e in order], dtype=np.int64)
    c_l = np.array([buckets[e][1] for e in order], dtype=np.uint8)
    c_u = np.array([buckets[e][2] for e in order], dtype=np.uint8)
    kwargs = {}
    if w is not None:
        in_rw = np.array([buckets[e][3] for e in order], dtype=np.uint8)
        any_rw = np.array([buckets[e][4] for e in order], dtype=np.uint8)
        kwargs = {
            "in_rw": in_rw,
            "obs_lower": in_rw & c_l,
            "obs_upper": any_rw & c_u,
        }
    pp = PrunedProblem(
        graph=g,
        query=q,
        observation=w,
        tables=encs,
        obj_lower=c_l,
        obj_upper=c_u,
        class_sizes=counts,
        build_ms=(time.perf_counter() - t0) * 1e3,
        **kwargs,
    )
    pp.verify_invariants()
    return pp


# ---------------------------------------------------------------------------
# partition check


def partition_check(space: ResponseSpace, r_cap: int | None = DEFAULT_R_CAP) -> bool:
    """Verify the class structure of the profile space: every profile lands in
    exactly one induced arc table, the induced tables are exactly the valid
    ones, and the class sizes sum to |R|."""
    g = space.graph
    total = _require_within_cap(space, r_cap)
    comps = _component_arrays(space, total)
    n_ctx = 1 << len(g.a_nodes)
    shifts = _enc_shifts(g)
    enc = np.zeros(total, dtype=np.int64)
    for a in range(n_ctx):
        enc |= _eval_codes(space, comps, a) << shifts[a]
    uniq, counts = np.unique(enc, return_counts=True)
    if int(counts.sum()) != total:
        return False
    n_b = len(g.b_nodes)
    induced = {int(e) for e in uniq}
    for e in induced:
        if not is_valid(Hyperarc.from_encoding(e, n_ctx, n_b), g):
            return False
    valid = set()
    for chunk in iter_valid_encoding_chunks(g):
        valid.update(int(x) for x in chunk.tolist())
    return induced == valid
