"""Shared random-instance generators for the test suite.

Every helper takes a caller-owned ``numpy.random.Generator`` so the drawing
sequence is pinned by the seed at the call site and the suites stay
deterministic.
"""

from __future__ import annotations

import numpy as np

from causalbounds.graph import (
    Assignment,
    CausalGraph,
    Observation,
    Query,
    validate_graph,
)
from causalbounds.hyperarcs import coefficient_rule_exact
from causalbounds.responses import count_R


def random_partitioned_graph(
    rng: np.random.Generator,
    *,
    max_b: int = 4,
    max_parents: int = 3,
    r_limit: int = 4096,
) -> CausalGraph:
    """Random two-block binary DAG: 1-2 context nodes followed by 2..``max_b``
    endogenous nodes, each endogenous node drawing up to ``max_parents``
    parents from all earlier nodes.  A fix-up pass gives every context node at
    least one endogenous child; graphs whose response-profile count exceeds
    ``r_limit`` are redrawn."""
    while True:
        na = int(rng.integers(1, 3))
        nb = int(rng.integers(2, max_b + 1))
        names = tuple([f"A{i}" for i in range(na)] + [f"B{i}" for i in range(nb)])
        parents: list[tuple[int, ...]] = [() for _ in range(na)]
        for j in range(na, na + nb):
            k = int(rng.integers(0, min(max_parents, j) + 1))
            if k:
                chosen = rng.choice(np.arange(j), size=k, replace=False)
                parents.append(tuple(sorted(int(x) for x in chosen)))
            else:
                parents.append(())
        for i in range(na):
            if not any(i in ps for ps in parents[na:]):
                j = int(rng.integers(na, na + nb))
                parents[j] = tuple(sorted(set(parents[j]) | {i}))
        g = CausalGraph(names=names, a_mask=(1 << na) - 1, parents=tuple(parents))
        if count_R(g) <= r_limit:
            return validate_graph(g)


def random_query(rng: np.random.Generator, g: CausalGraph) -> Query:
    """Random well-formed query: 0-2 intervened endogenous nodes, 1-2 outcome
    nodes disjoint from them, and a full random context assignment."""
    b = list(g.b_nodes)
    k_i = int(rng.integers(0, min(2, len(b) - 1) + 1))
    iv = sorted(int(x) for x in rng.choice(b, size=k_i, replace=False)) if k_i else []
    rest = [j for j in b if j not in iv]
    k_o = int(rng.integers(1, min(2, len(rest)) + 1))
    out = sorted(int(x) for x in rng.choice(rest, size=k_o, replace=False))
    return Query(
        intervene=Assignment.from_pairs([(j, int(rng.integers(2))) for j in iv]),
        outcome=Assignment.from_pairs([(j, int(rng.integers(2))) for j in out]),
        context=Assignment.from_pairs([(i, int(rng.integers(2))) for i in g.a_nodes]),
    )


def rule_exact_query(rng: np.random.Generator, g: CausalGraph) -> Query:
    """Redraw random queries until one lands in the class where the row-witness
    coefficient rule is provably exact (see ``coefficient_rule_exact``).

    Terminates because intervention-free draws always qualify.
    """
    for _ in range(200):
        q = random_query(rng, g)
        if coefficient_rule_exact(g, q):
            return q
    raise RuntimeError("no rule-exact query found in 200 draws")


def random_observation(rng: np.random.Generator, g: CausalGraph) -> Observation:
    """Random observed event fixing 1-2 endogenous nodes."""
    b = list(g.b_nodes)
    k = int(rng.integers(1, min(2, len(b)) + 1))
    ws = sorted(int(x) for x in rng.choice(b, size=k, replace=False))
    return Observation(
        observed=Assignment.from_pairs([(j, int(rng.integers(2))) for j in ws])
    )
