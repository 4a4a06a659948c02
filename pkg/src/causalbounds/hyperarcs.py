"""Context-to-endogenous arc tables: validity, objective coefficients, direct construction.

An *arc table* ``h`` maps every full context assignment ``v_A`` to a full
endogenous assignment ``h(v_A)``. The latent confounder selects one response
profile, which induces exactly one such table; a table is *achievable* (valid)
iff, for every endogenous node, the partial map "parent pattern seen in some
row → that node's bit in the row" is single-valued. Valid tables are the LP
columns; each carries binary objective coefficients:

* ``obj_lower`` — 1 iff every profile behind the table is consistent with the
  query (some context row agreeing with the query context on the critical
  context nodes outputs the intervention values on I and the outcome values on O);
* ``obj_upper`` — 1 unless some such row outputs the intervention values with a
  *different* outcome (then no profile behind the table can satisfy the query...
  i.e. the table's profiles are all query-inconsistent only when that witness
  exists for every completion; see the coefficient functions);
* with an observed event: ``in_rw`` (all profiles consistent with the observed
  values — for valid tables this is all-or-none), and the conditioned
  coefficients ``obs_lower = in_rw & obj_lower``, ``obs_upper = in_rw & obj_upper``.

Scope of the row-witness coefficient rule: the rule decides both flags by
scanning single context rows. That is provably exact for the query shapes
accepted by :func:`coefficient_rule_exact` (no intervention, or every
outcome node's parent set equal to critical context plus intervention set).
Outside that class a node's response can be pinned by rows the witness scan
never pairs up, and the flags may then disagree with per-profile
enumeration — but only in the widening direction (``obj_lower``
under-marked, ``obj_upper`` over-marked), so the resulting bounds stay
valid and at worst lose tightness. ``in_rw`` involves no intervention in
its membership test and is exact for every query.

Table encoding: with ``nA = 2^|A|`` rows of ``|B|`` bits each, the integer
encoding concatenates rows with the ``v_A = 0`` row *most* significant::

    enc = sum over v_A of  h(v_A) << (|B| * (nA - 1 - v_A))

Enumeration emits valid tables in ascending encoding order, so LP column order
and binary dumps are reproducible.
"""

from __future__ import annotations

import struct
import time
from dataclasses import dataclass

import numpy as np

from .errors import (
    CapacityExceeded,
    DichotomyViolation,
    DimensionMismatch,
)
from .graph import Assignment, CausalGraph, Observation, Query, critical_for_observation, critical_for_query, graph_digest, reduce_query

MAX_TABLE_BITS = 40  # |B| * 2^|A| must fit comfortably in a uint64 with headroom
CHUNK_BITS = 20      # candidate chunks of 2^20 during enumeration


# ---------------------------------------------------------------------------
# basic table type


@dataclass(frozen=True)
class Hyperarc:
    """One arc table: ``table[v_A]`` is the |B|-bit endogenous output row."""

    table: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.table:
            raise ValueError("arc table must have at least one row")
        if any(t < 0 for t in self.table):
            raise ValueError("arc table entries must be non-negative")

    def encoding(self, n_b: int) -> int:
        enc = 0
        for row in self.table:
            enc = (enc << n_b) | row
        return enc

    @classmethod
    def from_encoding(cls, enc: int, n_rows: int, n_b: int) -> "Hyperarc":
        mask = (1 << n_b) - 1
        rows = [0] * n_rows
        for a in range(n_rows - 1, -1, -1):
            rows[a] = enc & mask
            enc >>= n_b
        return cls(tuple(rows))


def table_bits(g: CausalGraph) -> int:
    return len(g.b_nodes) << len(g.a_nodes)


def candidate_count(g: CausalGraph) -> int:
    """Number of candidate tables, 2^(|B| * 2^|A|), as an exact integer."""
    return 1 << table_bits(g)


def _guard_capacity(g: CausalGraph) -> None:
    bits = table_bits(g)
    if bits > MAX_TABLE_BITS:
        raise CapacityExceeded(
            f"arc-table space needs {bits} bits (|B|={len(g.b_nodes)}, "
            f"2^|A|={1 << len(g.a_nodes)}); guard is {MAX_TABLE_BITS} bits"
        )


# ---------------------------------------------------------------------------
# validity (functional consistency per endogenous node)


def _node_check_plan(g: CausalGraph):
    """Per endogenous node: its bit position in a row, its context-parent
    positions (bit position within a_code), and endogenous-parent positions
    (bit position within a row)."""
    b_pos = {node: k for k, node in enumerate(g.b_nodes)}
    a_pos = {node: k for k, node in enumerate(g.a_nodes)}
    plan = []
    for node in g.b_nodes:
        a_parents = tuple(a_pos[p] for p in g.parents[node] if g.a_mask >> p & 1)
        b_parents = tuple(b_pos[p] for p in g.parents[node] if not g.a_mask >> p & 1)
        # parent key layout: context-parent bits first, then endogenous-parent bits
        plan.append((b_pos[node], a_parents, b_parents))
    return plan


def is_valid(h: Hyperarc, g: CausalGraph) -> bool:
    """True iff the table is achievable: every endogenous node's observed
    parent-pattern → value map is single-valued across the rows."""
    n_rows = 1 << len(g.a_nodes)
    n_b = len(g.b_nodes)
    if len(h.table) != n_rows:
        raise DimensionMismatch(
            f"table has {len(h.table)} rows, graph needs {n_rows}"
        )
    if any(row >> n_b for row in h.table):
        raise DimensionMismatch(f"table entry exceeds {n_b} bits")
    for bit, a_parents, b_parents in _node_check_plan(g):
        seen: dict[int, int] = {}
        for a_code in range(n_rows):
            row = h.table[a_code]
            key = 0
            for k, pos in enumerate(a_parents):
                key |= (a_code >> pos & 1) << k
            off = len(a_parents)
            for k, pos in enumerate(b_parents):
                key |= (row >> pos & 1) << (off + k)
            val = row >> bit & 1
            prev = seen.setdefault(key, val)
            if prev != val:
                return False
    return True


def _row_views(encs: np.ndarray, n_rows: int, n_b: int) -> list[np.ndarray]:
    """Per-row |B|-bit values for a vector of table encodings."""
    mask = np.uint64((1 << n_b) - 1)
    return [
        (encs >> np.uint64(n_b * (n_rows - 1 - a))) & mask
        for a in range(n_rows)
    ]


def iter_valid_encoding_chunks(g: CausalGraph, chunk_bits: int = CHUNK_BITS):
    """Yield ascending uint64 arrays of valid table encodings, by counting
    through the full candidate space in chunks and filtering each chunk."""
    _guard_capacity(g)
    bits = table_bits(g)
    n_rows = 1 << len(g.a_nodes)
    n_b = len(g.b_nodes)
    plan = _node_check_plan(g)
    total = 1 << bits
    step = 1 << min(chunk_bits, bits)
    for start in range(0, total, step):
        encs = np.arange(start, start + step, dtype=np.uint64)
        rows = _row_views(encs, n_rows, n_b)
        ok = np.ones(encs.shape[0], dtype=bool)
        for bit, a_parents, b_parents in plan:
            if not ok.any():
                break
            # the node's value and parent key in every row
            vals = [(rows[a] >> np.uint64(bit)) & np.uint64(1) for a in range(n_rows)]
            keys = []
            for a in range(n_rows):
                key = np.zeros(encs.shape[0], dtype=np.uint64)
                const = 0
                for k, pos in enumerate(a_parents):
                    const |= (a >> pos & 1) << k
                if const:
                    key |= np.uint64(const)
                off = len(a_parents)
                for k, pos in enumerate(b_parents):
                    key |= ((rows[a] >> np.uint64(pos)) & np.uint64(1)) << np.uint64(off + k)
                keys.append(key)
            for a1 in range(n_rows):
                for a2 in range(a1 + 1, n_rows):
                    ok &= (keys[a1] != keys[a2]) | (vals[a1] == vals[a2])
        if ok.any():
            yield encs[ok]


def enumerate_valid(g: CausalGraph):
    """Stream every valid table exactly once, ascending by encoding."""
    n_rows = 1 << len(g.a_nodes)
    n_b = len(g.b_nodes)
    for encs in iter_valid_encoding_chunks(g):
        for enc in encs.tolist():
            yield Hyperarc.from_encoding(int(enc), n_rows, n_b)


# ---------------------------------------------------------------------------
# context-row agreement sets


def _agreeing_a_codes(g: CausalGraph, context: Assignment, pin_mask: int) -> list[int]:
    """All a_codes that agree with the query context on the pinned context
    nodes (a global node mask) and range freely over the rest of A."""
    pin_pos = 0
    for k, node in enumerate(g.a_nodes):
        if pin_mask >> node & 1:
            pin_pos |= 1 << k
    base = g.a_code(context.values) & pin_pos
    free_pos = [k for k in range(len(g.a_nodes)) if not pin_pos >> k & 1]
    codes = []
    for sub in range(1 << len(free_pos)):
        code = base
        for k, pos in enumerate(free_pos):
            code |= (sub >> k & 1) << pos
        codes.append(code)
    return codes


def _b_bits(g: CausalGraph, a: Assignment) -> tuple[int, int]:
    """(mask, values) of an endogenous-block assignment in row-bit positions."""
    return g.b_code(a.scope), g.b_code(a.values)


# ---------------------------------------------------------------------------
# scalar coefficient theorems (reference implementations)


def coeff_cL(h: Hyperarc, g: CausalGraph, q: Query, c_of_q: int) -> int:
    """1 iff some context row agreeing with the query context on the critical
    context nodes outputs the intervention values on I and the outcome values
    on O. Requires the query to be reduced (I inside the critical set)."""
    i_mask, i_vals = _b_bits(g, q.intervene)
    o_mask, o_vals = _b_bits(g, q.outcome)
    for a_code in _agreeing_a_codes(g, q.context, c_of_q & g.a_mask):
        row = h.table[a_code]
        if (row & i_mask) == i_vals and (row & o_mask) == o_vals:
            return 1
    return 0


def coeff_cU(h: Hyperarc, g: CausalGraph, q: Query, c_of_q: int) -> int:
    """0 iff some such row outputs the intervention values with an outcome
    differing from the query outcome; else 1."""
    i_mask, i_vals = _b_bits(g, q.intervene)
    o_mask, o_vals = _b_bits(g, q.outcome)
    for a_code in _agreeing_a_codes(g, q.context, c_of_q & g.a_mask):
        row = h.table[a_code]
        if (row & i_mask) == i_vals and (row & o_mask) != o_vals:
            return 0
    return 1


def obs_membership(
    h: Hyperarc, g: CausalGraph, w: Observation, c_of_w: int, context: Assignment
) -> tuple[int, int]:
    """(in_rw, disjoint_rw): whether the profiles behind the table all satisfy
    the observed event, or none do. Exactly one flag is 1 for a valid table;
    a violation indicates an implementation bug and raises."""
    w_mask, w_vals = _b_bits(g, w.observed)
    in_rw = disjoint = 0
    for a_code in _agreeing_a_codes(g, context, c_of_w & g.a_mask):
        row = h.table[a_code]
        if (row & w_mask) == w_vals:
            in_rw = 1
        elif w_mask:
            disjoint = 1
    if not w_mask:
        disjoint = 0
    if in_rw + disjoint != 1:
        raise DichotomyViolation(
            f"arc table {h.table} is neither inside nor disjoint from the observed event"
        )
    return in_rw, disjoint


def coeff_dL(c_l: int, in_rw: int) -> int:
    """Conditioned lower coefficient: all profiles query- and observation-consistent."""
    return c_l & in_rw


def coeff_dU(c_u: int, disjoint_rw: int) -> int:
    """Conditioned upper coefficient: 0 iff no profile is query-consistent or
    the table is disjoint from the observed event."""
    return 1 - max(1 - c_u, disjoint_rw)


def coefficient_rule_exact(g: CausalGraph, q: Query) -> bool:
    """Whether the row-witness coefficient rule provably matches per-profile
    enumeration for this query.

    True for two query shapes (see the module docstring):

    * no intervention — membership reduces to reading the query-context row,
      and rows agreeing on the critical context share their outcome values;
    * every outcome node has parent set equal to the critical context plus
      the intervention set — then every outcome pattern is realized under
      one shared row condition (a critical-context-agreeing row outputting
      the intervention values), so either one row pins all outcome nodes at
      once or all of them are free, which is exactly what a single row
      witness can decide.

    Outside this class the flags can only widen the relaxation (bounds remain
    valid); per-profile enumeration stays the tightness reference.

    The query is reduced first (as the builders do), so queries whose
    interventions all drop out during reduction land in the first shape.
    """
    q = reduce_query(g, q)
    if q.intervene.scope == 0:
        return True
    crit_a = critical_for_query(g, q) & g.a_mask
    want = crit_a | q.intervene.scope
    for o in g.b_nodes:
        if (q.outcome.scope >> o) & 1:
            parent_mask = 0
            for j in g.parents[o]:
                parent_mask |= 1 << j
            if parent_mask != want:
                return False
    return True


# ---------------------------------------------------------------------------
# vectorized coefficient kernels


def _coeff_arrays(
    g: CausalGraph, q: Query, c_of_q: int, encs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    n_rows = 1 << len(g.a_nodes)
    n_b = len(g.b_nodes)
    rows = _row_views(encs, n_rows, n_b)
    i_mask, i_vals = _b_bits(g, q.intervene)
    o_mask, o_vals = _b_bits(g, q.outcome)
    im, iv = np.uint64(i_mask), np.uint64(i_vals)
    om, ov = np.uint64(o_mask), np.uint64(o_vals)
    c_l = np.zeros(encs.shape[0], dtype=bool)
    c_u0 = np.zeros(encs.shape[0], dtype=bool)
    for a_code in _agreeing_a_codes(g, q.context, c_of_q & g.a_mask):
        row = rows[a_code]
        i_hit = (row & im) == iv
        o_hit = (row & om) == ov
        c_l |= i_hit & o_hit
        c_u0 |= i_hit & ~o_hit
    return c_l.astype(np.uint8), (~c_u0).astype(np.uint8)


def _obs_arrays(
    g: CausalGraph, w: Observation, c_of_w: int, context: Assignment, encs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    n_rows = 1 << len(g.a_nodes)
    n_b = len(g.b_nodes)
    rows = _row_views(encs, n_rows, n_b)
    w_mask, w_vals = _b_bits(g, w.observed)
    wm, wv = np.uint64(w_mask), np.uint64(w_vals)
    in_rw = np.zeros(encs.shape[0], dtype=bool)
    disjoint = np.zeros(encs.shape[0], dtype=bool)
    for a_code in _agreeing_a_codes(g, context, c_of_w & g.a_mask):
        row = rows[a_code]
        hit = (row & wm) == wv
        in_rw |= hit
        if w_mask:
            disjoint |= ~hit
    if np.any(in_rw == disjoint):
        bad = int(encs[in_rw == disjoint][0])
        raise DichotomyViolation(
            f"table encoding {bad} is neither inside nor disjoint from the observed event"
        )
    return in_rw.astype(np.uint8), disjoint.astype(np.uint8)


# ---------------------------------------------------------------------------
# pruned problem


@dataclass
class PrunedProblem:
    """The aggregated LP data: valid tables (ascending encodings) with binary
    objective coefficients, and conditioned variants when an observation is set.

    ``class_sizes`` is only populated by the profile-enumeration benchmarks,
    which count how many response profiles induce each table."""

    graph: CausalGraph
    query: Query
    observation: Observation | None
    tables: np.ndarray            # uint64 encodings, ascending
    obj_lower: np.ndarray         # uint8
    obj_upper: np.ndarray         # uint8
    in_rw: np.ndarray | None = None
    obs_lower: np.ndarray | None = None
    obs_upper: np.ndarray | None = None
    class_sizes: np.ndarray | None = None
    build_ms: float = 0.0

    @property
    def size(self) -> int:
        return int(self.tables.shape[0])

    def verify_invariants(self) -> None:
        if self.size == 0:
            raise AssertionError("no valid arc tables — graph assumptions violated")
        if np.any(self.obj_lower > self.obj_upper):
            raise AssertionError("obj_lower exceeds obj_upper on some table")
        if self.tables.shape[0] > 1 and np.any(np.diff(self.tables.astype(np.int64)) <= 0):
            raise AssertionError("table encodings not strictly ascending")
        if self.observation is not None:
            assert self.in_rw is not None and self.obs_lower is not None and self.obs_upper is not None
            if np.any(self.obs_lower > self.obs_upper):
                raise AssertionError("obs_lower exceeds obs_upper on some table")
            if np.any(self.obs_lower > (self.obj_lower & self.in_rw)):
                raise AssertionError("obs_lower exceeds obj_lower * in_rw")


def build_pruned(
    g: CausalGraph, q: Query, p: np.ndarray | None = None
) -> PrunedProblem:
    """Construct the pruned problem by one ascending pass over candidate
    tables, validity-filtering and computing coefficients per chunk — the
    response-profile space is never materialized."""
    t0 = time.perf_counter()
    _check_table_dims(g, p)
    q = reduce_query(g, q)
    c_of_q = critical_for_query(g, q)
    parts_t, parts_l, parts_u = [], [], []
    for encs in iter_valid_encoding_chunks(g):
        c_l, c_u = _coeff_arrays(g, q, c_of_q, encs)
        parts_t.append(encs)
        parts_l.append(c_l)
        parts_u.append(c_u)
    pp = PrunedProblem(
        graph=g,
        query=q,
        observation=None,
        tables=_cat(parts_t, np.uint64),
        obj_lower=_cat(parts_l, np.uint8),
        obj_upper=_cat(parts_u, np.uint8),
        build_ms=(time.perf_counter() - t0) * 1e3,
    )
    pp.verify_invariants()
    return pp


def build_pruned_observed(
    g: CausalGraph, q: Query, w: Observation, p: np.ndarray | None = None
) -> PrunedProblem:
    """Observation-conditioned variant: additionally derives the observed-event
    membership flag and the conditioned coefficient pair per valid table."""
    t0 = time.perf_counter()
    _check_table_dims(g, p)
    q = reduce_query(g, q)
    c_of_q = critical_for_query(g, q)
    c_of_w = critical_for_observation(g, w.observed.scope)
    parts = ([], [], [], [], [], [])
    for encs in iter_valid_encoding_chunks(g):
        c_l, c_u = _coeff_arrays(g, q, c_of_q, encs)
        in_rw, disjoint = _obs_arrays(g, w, c_of_w, q.context, encs)
        parts[0].append(encs)
        parts[1].append(c_l)
        parts[2].append(c_u)
        parts[3].append(in_rw)
        parts[4].append(c_l & in_rw)
        parts[5].append((1 - np.maximum(1 - c_u, disjoint)).astype(np.uint8))
    pp = PrunedProblem(
        graph=g,
        query=q,
        observation=w,
        tables=_cat(parts[0], np.uint64),
        obj_lower=_cat(parts[1], np.uint8),
        obj_upper=_cat(parts[2], np.uint8),
        in_rw=_cat(parts[3], np.uint8),
        obs_lower=_cat(parts[4], np.uint8),
        obs_upper=_cat(parts[5], np.uint8),
        build_ms=(time.perf_counter() - t0) * 1e3,
    )
    pp.verify_invariants()
    return pp


def _check_table_dims(g: CausalGraph, p: np.ndarray | None) -> None:
    if p is None:
        return
    want = (1 << len(g.a_nodes), 1 << len(g.b_nodes))
    if tuple(p.shape) != want:
        raise DimensionMismatch(f"probability table shape {p.shape}, graph needs {want}")


def _cat(parts: list[np.ndarray], dtype) -> np.ndarray:
    if not parts:
        return np.zeros(0, dtype=dtype)
    return np.concatenate(parts).astype(dtype, copy=False)


# ---------------------------------------------------------------------------
# binary dump

_MAGIC = b"CBPP"
_VERSION = 1
_FLAG_OBSERVED = 1


def save_pruned(pp: PrunedProblem, path) -> None:
    """Write the problem to a compact binary file: a fixed header (format tag,
    graph digest, block sizes, table count) followed by one record per table —
    the uint64 encoding (little-endian) and one coefficient byte (bit 0
    obj_lower, bit 1 obj_upper, bit 2 in_rw, bit 3 obs_lower, bit 4 obs_upper)."""
    flags = _FLAG_OBSERVED if pp.observation is not None else 0
    header = struct.pack(
        "<4sBB8sBBQ",
        _MAGIC,
        _VERSION,
        flags,
        graph_digest(pp.graph),
        len(pp.graph.a_nodes),
        len(pp.graph.b_nodes),
        pp.size,
    )
    coeff = pp.obj_lower.astype(np.uint8) | (pp.obj_upper.astype(np.uint8) << 1)
    if pp.observation is not None:
        coeff = coeff | (pp.in_rw << 2) | (pp.obs_lower << 3) | (pp.obs_upper << 4)
    rec = np.zeros(pp.size, dtype=np.dtype([("enc", "<u8"), ("coeff", "u1")]))
    rec["enc"] = pp.tables
    rec["coeff"] = coeff
    with open(path, "wb") as fh:
        fh.write(header)
        rec.tofile(fh)


def load_pruned(
    path, g: CausalGraph, q: Query, w: Observation | None = None
) -> PrunedProblem:
    """Read a dump back; verifies the stored graph digest and block sizes."""
    with open(path, "rb") as fh:
        header = fh.read(struct.calcsize("<4sBB8sBBQ"))
        magic, version, flags, digest, n_a, n_b, count = struct.unpack("<4sBB8sBBQ", header)
        if magic != _MAGIC or version != _VERSION:
            raise ValueError("not a pruned-problem dump (bad magic or version)")
        if digest != graph_digest(g):
            raise ValueError("dump was built for a different graph")
        if (n_a, n_b) != (len(g.a_nodes), len(g.b_nodes)):
            raise ValueError("dump block sizes do not match the graph")
        observed = bool(flags & _FLAG_OBSERVED)
        if observed != (w is not None):
            raise ValueError("dump observation flag does not match the request")
        rec = np.fromfile(fh, dtype=np.dtype([("enc", "<u8"), ("coeff", "u1")]), count=count)
    if rec.shape[0] != count:
        raise ValueError("dump truncated")
    coeff = rec["coeff"]
    pp = PrunedProblem(
        graph=g,
        query=reduce_query(g, q),
        observation=w,
        tables=rec["enc"].astype(np.uint64),
        obj_lower=(coeff & 1).astype(np.uint8),
        obj_upper=((coeff >> 1) & 1).astype(np.uint8),
        in_rw=((coeff >> 2) & 1).astype(np.uint8) if observed else None,
        obs_lower=((coeff >> 3) & 1).astype(np.uint8) if observed else None,
        obs_upper=((coeff >> 4) & 1).astype(np.uint8) if observed else None,
    )
    pp.verify_invariants()
    return pp
