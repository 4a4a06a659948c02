"""Partitioned binary causal graphs, counterfactual queries, and critical-variable analysis.

The data model: ``n`` binary nodes indexed ``0..n-1`` in topological order. The
index set is partitioned into a *context* block A (root nodes whose values are
always conditioned on) and an *endogenous* block B (nodes driven by a shared
latent confounder). Assignments of values to node subsets are stored as a pair
of bitmasks, with node ``i`` at bit position ``i``.

Structural requirements checked by :func:`validate_graph`:

* A precedes B in the node order and every node belongs to exactly one block;
* A-nodes have no parents but each has at least one child;
* latent confounder groups stay inside one block (the default group is all of B);
* every edge points forward in the node order.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property

from .errors import GraphValidationError, ScopeOutsideB

MAX_NODES = 62  # assignments are bitmasks in a machine word with headroom


@dataclass(frozen=True)
class Assignment:
    """Binary values for a subset of nodes.

    ``scope`` has bit ``i`` set when node ``i`` carries a value; ``values``
    holds that value at the same bit position (and is zero outside ``scope``).
    """

    scope: int = 0
    values: int = 0

    def __post_init__(self) -> None:
        if self.scope < 0 or self.values < 0:
            raise ValueError("assignment masks must be non-negative")
        if self.values & ~self.scope:
            raise ValueError("assignment has values outside its scope")

    @classmethod
    def from_pairs(cls, pairs) -> "Assignment":
        scope = values = 0
        for i, v in pairs:
            bit = 1 << i
            if scope & bit:
                raise ValueError(f"node {i} assigned twice")
            scope |= bit
            if v not in (0, 1):
                raise ValueError(f"node {i}: value must be 0 or 1, got {v!r}")
            values |= bit * v
        return cls(scope, values)

    def value(self, i: int) -> int:
        if not self.scope >> i & 1:
            raise KeyError(f"node {i} not in assignment scope")
        return self.values >> i & 1

    def items(self) -> list[tuple[int, int]]:
        out = []
        s = self.scope
        while s:
            low = s & -s
            i = low.bit_length() - 1
            out.append((i, self.values >> i & 1))
            s ^= low
        return out

    def restrict(self, mask: int) -> "Assignment":
        return Assignment(self.scope & mask, self.values & mask)

    def merge(self, other: "Assignment") -> "Assignment":
        if self.scope & other.scope:
            raise ValueError("cannot merge overlapping assignments")
        return Assignment(self.scope | other.scope, self.values | other.values)

    def __len__(self) -> int:
        return self.scope.bit_count()

    def __bool__(self) -> bool:
        return self.scope != 0


EMPTY = Assignment(0, 0)


@dataclass(frozen=True)
class CausalGraph:
    """Immutable DAG over binary nodes with an A/B partition.

    ``parents[i]`` is the ascending tuple of parent indices of node ``i``.
    ``latent_groups`` lists the scopes (bitmasks) of latent confounders; the
    default single group covering all of B encodes the worst-case assumption
    that every endogenous node shares one confounder.
    """

    names: tuple[str, ...]
    a_mask: int
    parents: tuple[tuple[int, ...], ...]
    latent_groups: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        n = len(self.names)
        if n < 1 or n > MAX_NODES:
            raise ValueError(f"node count must be in 1..{MAX_NODES}, got {n}")
        if len(self.parents) != n:
            raise ValueError("parents list length must equal node count")
        if self.a_mask < 0 or self.a_mask >> n:
            raise ValueError("a_mask references nodes outside the graph")
        if len(set(self.names)) != n:
            raise ValueError("node names must be unique")
        for i, pa in enumerate(self.parents):
            for p in pa:
                if not 0 <= p < n:
                    raise ValueError(f"node {i}: parent index {p} out of range")
            if tuple(sorted(set(pa))) != pa:
                raise ValueError(f"node {i}: parent tuple must be sorted and duplicate-free")
        if not self.latent_groups:
            object.__setattr__(self, "latent_groups", (self.b_mask,))

    # -- derived structure ------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def b_mask(self) -> int:
        return ((1 << self.n) - 1) & ~self.a_mask

    @cached_property
    def a_nodes(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if self.a_mask >> i & 1)

    @cached_property
    def b_nodes(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if not self.a_mask >> i & 1)

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.n)]
        for i, pa in enumerate(self.parents):
            for p in pa:
                out[p].append(i)
        return tuple(tuple(c) for c in out)

    @cached_property
    def index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.names)}

    # -- local (block-compressed) encodings --------------------------------
    # Tables index cells by (a_code, b_code): bit k of a_code is the value of
    # the k-th A-node in index order, likewise for b_code over B-nodes.

    def a_code(self, values_mask: int) -> int:
        code = 0
        for k, i in enumerate(self.a_nodes):
            code |= (values_mask >> i & 1) << k
        return code

    def b_code(self, values_mask: int) -> int:
        code = 0
        for k, i in enumerate(self.b_nodes):
            code |= (values_mask >> i & 1) << k
        return code

    def mask_from_a_code(self, code: int) -> int:
        mask = 0
        for k, i in enumerate(self.a_nodes):
            mask |= (code >> k & 1) << i
        return mask

    def mask_from_b_code(self, code: int) -> int:
        mask = 0
        for k, i in enumerate(self.b_nodes):
            mask |= (code >> k & 1) << i
        return mask

    def node_set(self, names) -> int:
        mask = 0
        for name in names:
            mask |= 1 << self.index[name]
        return mask


@dataclass(frozen=True)
class Query:
    """Counterfactual query: probability that the outcome nodes take the given
    values under intervention, conditional on the full context assignment."""

    intervene: Assignment
    outcome: Assignment
    context: Assignment

    def __post_init__(self) -> None:
        if not self.outcome:
            raise ValueError("query outcome must be non-empty")
        if self.intervene.scope & self.outcome.scope:
            raise ValueError("intervention and outcome scopes overlap")


@dataclass(frozen=True)
class Observation:
    """Conditioning event on endogenous nodes (may be empty)."""

    observed: Assignment = EMPTY


@dataclass(frozen=True)
class Problem:
    """A graph with its query and optional observation, as read from JSON."""

    graph: CausalGraph
    query: Query
    observation: Observation | None = None


# ---------------------------------------------------------------------------
# validation


def validate_graph(g: CausalGraph) -> CausalGraph:
    """Check the partition/order assumptions; return ``g`` or raise.

    Raises :class:`GraphValidationError` carrying every violated condition,
    coded ``NotPartitioned``, ``ANodeHasParent``, ``AChildless``,
    ``ConfounderSpansPartition``, ``NotTopological``.
    """
    violations: list[tuple[str, str]] = []
    if g.a_nodes and g.b_nodes and max(g.a_nodes) > min(g.b_nodes):
        violations.append(
            ("NotPartitioned",
             "context nodes must precede all endogenous nodes in the node order")
        )
    for i in g.a_nodes:
        if g.parents[i]:
            violations.append(("ANodeHasParent", f"context node {g.names[i]} has parents"))
        if not g.children[i]:
            violations.append(("AChildless", f"context node {g.names[i]} has no child"))
    for group in g.latent_groups:
        if group & g.a_mask and group & g.b_mask:
            violations.append(
                ("ConfounderSpansPartition",
                 "a latent confounder group spans both blocks")
            )
    for i, pa in enumerate(g.parents):
        bad = [p for p in pa if p >= i]
        if bad:
            violations.append(
                ("NotTopological",
                 f"node {g.names[i]} has parent(s) {[g.names[p] for p in bad]} not preceding it")
            )
    if violations:
        raise GraphValidationError(violations)
    return g


# ---------------------------------------------------------------------------
# mutilation and critical sets


def mutilate(g: CausalGraph, i_scope: int) -> CausalGraph:
    """Return the graph with all incoming edges of the intervened nodes removed."""
    if i_scope & ~g.b_mask:
        raise ScopeOutsideB("intervention scope must lie inside the endogenous block")
    parents = tuple(
        () if i_scope >> i & 1 else pa for i, pa in enumerate(g.parents)
    )
    return CausalGraph(g.names, g.a_mask, parents, g.latent_groups)


def _ancestors(g: CausalGraph, seed_mask: int) -> int:
    """Nodes with a directed path (length >= 0) to some node in ``seed_mask``."""
    reached = seed_mask
    stack = [i for i in range(g.n) if seed_mask >> i & 1]
    while stack:
        i = stack.pop()
        for p in g.parents[i]:
            bit = 1 << p
            if not reached & bit:
                reached |= bit
                stack.append(p)
    return reached


def critical_for_query(g: CausalGraph, query: Query) -> int:
    """Nodes that can still influence the outcome once the intervention is applied.

    Returns the bitmask of nodes with a directed path (length >= 0, so the
    outcome nodes themselves are included) to some outcome node in the graph
    mutilated by the query's intervention scope.
    """
    cut = mutilate(g, query.intervene.scope)
    return _ancestors(cut, query.outcome.scope)


def critical_for_observation(g: CausalGraph, w_scope: int) -> int:
    """Context nodes with a directed path to some observed node in the intact graph."""
    if w_scope & ~g.b_mask:
        raise ScopeOutsideB("observation scope must lie inside the endogenous block")
    return _ancestors(g, w_scope) & g.a_mask


def reduce_query(g: CausalGraph, query: Query) -> Query:
    """Drop intervention nodes that cannot influence the outcome.

    The returned query has the intervention scope intersected with the critical
    set; its value is provably unchanged, and re-reducing is a no-op.
    """
    crit = critical_for_query(g, query)
    keep = query.intervene.scope & crit
    if keep == query.intervene.scope:
        return query
    return Query(query.intervene.restrict(keep), query.outcome, query.context)


# ---------------------------------------------------------------------------
# JSON interface


def _assignment_from_dict(g: CausalGraph, d: dict, what: str) -> Assignment:
    pairs = []
    for name, v in d.items():
        if name not in g.index:
            raise ValueError(f"{what}: unknown node {name!r}")
        pairs.append((g.index[name], int(v)))
    return Assignment.from_pairs(pairs)


def problem_from_json(text: str) -> Problem:
    """Parse the self-describing problem document.

    Expected shape::

        {"nodes": [...], "a_set": [...], "parents": {"X": ["Z"], ...},
         "query": {"intervene": {"X": 1}, "outcome": {"Y": 1}, "context": {"Z": 1}},
         "observe": {"X": 0}}

    ``observe`` is optional. The graph is validated before returning.
    """
    doc = json.loads(text)
    names = tuple(str(x) for x in doc["nodes"])
    index = {name: i for i, name in enumerate(names)}
    a_mask = 0
    for name in doc["a_set"]:
        if name not in index:
            raise ValueError(f"a_set: unknown node {name!r}")
        a_mask |= 1 << index[name]
    parents: list[tuple[int, ...]] = [() for _ in names]
    for child, plist in doc.get("parents", {}).items():
        if child not in index:
            raise ValueError(f"parents: unknown node {child!r}")
        parents[index[child]] = tuple(sorted(index[p] for p in plist))
    g = validate_graph(CausalGraph(names, a_mask, tuple(parents)))

    qd = doc["query"]
    query = Query(
        intervene=_assignment_from_dict(g, qd.get("intervene", {}), "intervene"),
        outcome=_assignment_from_dict(g, qd["outcome"], "outcome"),
        context=_assignment_from_dict(g, qd.get("context", {}), "context"),
    )
    if query.context.scope != g.a_mask:
        raise ValueError("query context must assign every context node exactly once")
    if (query.intervene.scope | query.outcome.scope) & ~g.b_mask:
        raise ValueError("intervention and outcome scopes must lie inside the endogenous block")

    observation = None
    if "observe" in doc and doc["observe"] is not None:
        # The observed event lives in the pre-intervention world, so it may
        # freely overlap the intervention scope (counterfactual conditioning).
        w = _assignment_from_dict(g, doc["observe"], "observe")
        if w.scope & ~g.b_mask:
            raise ValueError("observed nodes must lie inside the endogenous block")
        observation = Observation(w)
    return Problem(g, query, observation)


def problem_to_json(problem: Problem) -> str:
    """Serialize a problem back to the canonical JSON document (stable key order)."""
    g = problem.graph
    doc = {
        "nodes": list(g.names),
        "a_set": [g.names[i] for i in g.a_nodes],
        "parents": {
            g.names[i]: [g.names[p] for p in pa]
            for i, pa in enumerate(g.parents)
            if pa
        },
        "query": {
            "intervene": {g.names[i]: v for i, v in problem.query.intervene.items()},
            "outcome": {g.names[i]: v for i, v in problem.query.outcome.items()},
            "context": {g.names[i]: v for i, v in problem.query.context.items()},
        },
    }
    if problem.observation is not None:
        doc["observe"] = {g.names[i]: v for i, v in problem.observation.observed.items()}
    return json.dumps(doc, indent=2, sort_keys=False)


def graph_digest(g: CausalGraph) -> bytes:
    """Stable 8-byte digest of the graph structure (used by binary dumps)."""
    doc = json.dumps(
        {"nodes": list(g.names),
         "a_set": [g.names[i] for i in g.a_nodes],
         "parents": {g.names[i]: list(pa) for i, pa in enumerate(g.parents)}},
        sort_keys=True,
    )
    return hashlib.sha256(doc.encode()).digest()[:8]
