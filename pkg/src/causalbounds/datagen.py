"""Instance generators: builtin benchmark problems, structural-model tables,
and seeded random instances.

A :class:`StructuralModel` assigns each node a linear-logistic equation
``v_j ~ Bernoulli(expit(sum(coeff * parent value) + u_coeff * U))`` where the
latent ``U`` is standard normal and shared per block: one draw drives all
context nodes, an independent one drives all endogenous nodes.  Probability
tables are conditional on the context assignment, so only the endogenous
block's latent needs integrating; this module does that either exactly
(Gauss-Hermite quadrature) or by Monte Carlo averaging.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy.special import expit

from .bounds import ProbabilityTable, _assemble_exact, _coerce_table
from .errors import InfeasibleError
from .graph import (
    EMPTY,
    Assignment,
    CausalGraph,
    Observation,
    Problem,
    Query,
    validate_graph,
)
from .hyperarcs import PrunedProblem, build_pruned, candidate_count
from .lp import DEFAULT_COLUMN_CAP, solve

DEFAULT_QUADRATURE_NODES = 64
DEFAULT_MC_SAMPLES = 1_000_000
_MC_CHUNK = 1 << 16
_MAX_DIRICHLET_TRIES = 1000
# Feasibility probes enumerate candidate tables; beyond this count the scan
# itself (not the solve) becomes the bottleneck, so larger graphs are skipped.
_FEASIBILITY_ENUM_CAP = 1 << 24


# ---------------------------------------------------------------------------
# structural models


@dataclass(frozen=True)
class StructuralModel:
    """Linear-logistic equations over a graph.

    ``coeffs[j]`` holds one weight per entry of ``graph.parents[j]`` (same
    order); ``u_coeffs[j]`` is the loading of node ``j`` on its block's latent
    variable.  A weight of zero keeps a graph edge while silencing it in the
    equations, so the graph may be strictly richer than the equation system.
    """

    graph: CausalGraph
    coeffs: tuple[tuple[float, ...], ...]
    u_coeffs: tuple[float, ...]

    def __post_init__(self) -> None:
        g = self.graph
        if len(self.coeffs) != g.n or len(self.u_coeffs) != g.n:
            raise ValueError("model must provide one equation per node")
        for j, (pa, cs) in enumerate(zip(g.parents, self.coeffs)):
            if len(cs) != len(pa):
                raise ValueError(
                    f"node {g.names[j]}: {len(cs)} coefficients for {len(pa)} parents"
                )
            if not all(np.isfinite(c) for c in cs):
                raise ValueError(f"node {g.names[j]}: coefficients must be finite")
        if not all(np.isfinite(u) for u in self.u_coeffs):
            raise ValueError("latent loadings must be finite")


def unit_model(g: CausalGraph) -> StructuralModel:
    """Model with weight 1 on every edge and every latent loading."""
    return StructuralModel(
        graph=g,
        coeffs=tuple(tuple(1.0 for _ in pa) for pa in g.parents),
        u_coeffs=tuple(1.0 for _ in range(g.n)),
    )


def sem_random_model(m: StructuralModel, seed: int) -> StructuralModel:
    """Perturb every endogenous-node coefficient (edge weights and latent
    loading) by an independent standard-normal draw; deterministic per seed.

    Context-node equations are untouched: tables condition on the context, so
    those equations never influence a generated table.
    """
    rng = np.random.default_rng(seed)
    coeffs = list(m.coeffs)
    u_coeffs = list(m.u_coeffs)
    for j in m.graph.b_nodes:
        coeffs[j] = tuple(c + rng.standard_normal() for c in coeffs[j])
        u_coeffs[j] = u_coeffs[j] + rng.standard_normal()
    return replace(m, coeffs=tuple(coeffs), u_coeffs=tuple(u_coeffs))


# ---------------------------------------------------------------------------
# table construction


def _endogenous_predictors(m: StructuralModel, a_code: int) -> np.ndarray:
    """Linear predictor (before the latent term) of each endogenous node at
    every endogenous cell, as an (n_cells, |B|) array."""
    g = m.graph
    b_index = {i: k for k, i in enumerate(g.b_nodes)}
    a_index = {i: k for k, i in enumerate(g.a_nodes)}
    n_b = len(g.b_nodes)
    cells = np.arange(1 << n_b, dtype=np.int64)
    base = np.zeros((cells.size, n_b))
    for k, j in enumerate(g.b_nodes):
        for p, c in zip(g.parents[j], m.coeffs[j]):
            if c == 0.0:
                continue
            if g.a_mask >> p & 1:
                base[:, k] += c * (a_code >> a_index[p] & 1)
            else:
                base[:, k] += c * ((cells >> b_index[p]) & 1)
    return base


def _integrate_cells(
    base: np.ndarray, u_loads: np.ndarray, u: np.ndarray, weights: np.ndarray
) -> np.ndarray:
    """Weighted average over latent draws of the per-cell Bernoulli product."""
    n_cells, n_b = base.shape
    bits = (np.arange(n_cells, dtype=np.int64)[:, None] >> np.arange(n_b)[None, :]) & 1
    out = np.zeros(n_cells)
    for lo in range(0, u.size, _MC_CHUNK):
        u_chunk = u[lo : lo + _MC_CHUNK]
        acc = np.ones((n_cells, u_chunk.size))
        for k in range(n_b):
            s = expit(base[:, k, None] + u_loads[k] * u_chunk[None, :])
            acc *= np.where(bits[:, k : k + 1] == 1, s, 1.0 - s)
        out += acc @ weights[lo : lo + _MC_CHUNK]
    return out


def table_from_model(
    m: StructuralModel,
    mode: str = "quadrature",
    seed: int = 0,
    *,
    quad_nodes: int = DEFAULT_QUADRATURE_NODES,
    n_samples: int = DEFAULT_MC_SAMPLES,
    verify_feasible: bool = False,
) -> ProbabilityTable:
    """Integrate the endogenous block's latent variable out of ``m``.

    ``quadrature`` uses Gauss-Hermite nodes (deterministic; the default);
    ``monte-carlo`` averages over ``n_samples`` standard-normal draws from the
    given seed.  Rows are renormalized to machine-exact sums.  With
    ``verify_feasible`` the result is additionally checked against the graph's
    arc-table polytope (see :func:`assert_table_feasible`).
    """
    if mode == "quadrature":
        x, w = np.polynomial.hermite.hermgauss(quad_nodes)
        u = x * np.sqrt(2.0)
        weights = w / np.sqrt(np.pi)
        weights = weights / weights.sum()
    elif mode == "monte-carlo":
        rng = np.random.default_rng(seed)
        u = rng.standard_normal(int(n_samples))
        weights = np.full(u.size, 1.0 / u.size)
    else:
        raise ValueError(f"unknown table mode {mode!r} (quadrature | monte-carlo)")
    g = m.graph
    u_loads = np.array([m.u_coeffs[j] for j in g.b_nodes])
    rows = [
        _integrate_cells(_endogenous_predictors(m, a_code), u_loads, u, weights)
        for a_code in range(1 << len(g.a_nodes))
    ]
    table = ProbabilityTable.from_array(np.stack(rows))
    if verify_feasible:
        assert_table_feasible(g, table)
    return table


def _feasibility_probe(pp: PrunedProblem, values: np.ndarray, column_cap: int) -> None:
    solve(_assemble_exact(pp, values, "min"), column_cap=column_cap)


def assert_table_feasible(g: CausalGraph, p, *, column_cap: int = DEFAULT_COLUMN_CAP) -> None:
    """Raise :class:`InfeasibleError` if no mixture of valid arc tables
    produces ``p``; silently skip graphs too large to check (candidate scan
    beyond the enumeration cap, or valid-table count beyond the solver cap)."""
    if candidate_count(g) > _FEASIBILITY_ENUM_CAP:
        return
    values = _coerce_table(g, p)
    pp = build_pruned(g, _probe_query(g), values)
    if pp.size > column_cap:
        return
    _feasibility_probe(pp, values, column_cap)


def _probe_query(g: CausalGraph) -> Query:
    """Arbitrary well-formed query; feasibility does not depend on it."""
    return Query(
        intervene=EMPTY,
        outcome=Assignment.from_pairs([(g.b_nodes[0], 1)]),
        context=Assignment(g.a_mask, 0),
    )


def random_instance(
    source: CausalGraph | StructuralModel,
    seed: int = 0,
    mode: str = "sem-random",
    *,
    quad_nodes: int = DEFAULT_QUADRATURE_NODES,
    feasibility_cap: int = DEFAULT_COLUMN_CAP,
) -> ProbabilityTable:
    """Seeded random probability table for a graph or model.

    ``sem-random`` perturbs the model's coefficients (unit coefficients when
    given a bare graph) with standard-normal draws and integrates exactly, so
    the result always lies in the arc-table polytope.  ``dirichlet-random``
    draws each context row from a flat Dirichlet and redraws until the table
    is feasible for the graph (checked whenever the table count fits the
    solver cap; larger graphs are emitted unchecked).
    """
    if isinstance(source, StructuralModel):
        g, model = source.graph, source
    else:
        g, model = source, None
    if mode == "sem-random":
        base = model if model is not None else unit_model(g)
        return table_from_model(sem_random_model(base, seed), quad_nodes=quad_nodes)
    if mode != "dirichlet-random":
        raise ValueError(f"unknown instance mode {mode!r} (sem-random | dirichlet-random)")
    rng = np.random.default_rng(seed)
    n_rows, n_cells = 1 << len(g.a_nodes), 1 << len(g.b_nodes)
    checkable = candidate_count(g) <= _FEASIBILITY_ENUM_CAP
    pp = build_pruned(g, _probe_query(g)) if checkable else None
    if pp is not None and pp.size > feasibility_cap:
        pp = None
    for _ in range(_MAX_DIRICHLET_TRIES):
        values = rng.dirichlet(np.ones(n_cells), size=n_rows)
        if pp is not None:
            try:
                _feasibility_probe(pp, values, feasibility_cap)
            except InfeasibleError:
                continue
        return ProbabilityTable.from_array(values)
    raise RuntimeError(
        f"no feasible Dirichlet table found in {_MAX_DIRICHLET_TRIES} draws (seed {seed})"
    )


# ---------------------------------------------------------------------------
# builtin benchmark problems

# Each entry: node names in topological order (context nodes first), parent
# names per endogenous node, edges whose equation weight is zero (graph edge
# present, no equation term), the query, and the conditioning event.
_BUILTINS: dict[str, dict] = {
    "A": dict(
        names=("Z1", "Z2", "S1", "X1", "S2", "X2", "Y"),
        parents={
            "S1": (),
            "X1": ("S1",),
            "S2": ("Z2", "S1", "X1"),
            "X2": ("Z1", "Z2", "S2"),
            "Y": ("Z2", "S2", "X2"),
        },
        intervene={"X2": 1},
        outcome={"Y": 1},
        observed={"Y": 1},
    ),
    "B": dict(
        names=("C", "F", "A", "B", "D", "E", "Y"),
        parents={
            "A": ("C", "F"),
            "B": ("C", "F"),
            "D": ("A",),
            "E": ("A", "B"),
            "Y": ("C", "D", "E"),
        },
        intervene={"A": 1, "B": 1},
        outcome={"Y": 1},
        observed={"Y": 1},
    ),
    "C": dict(
        names=("W1", "W3", "T", "M1", "M2", "Y", "X3"),
        parents={
            "T": ("W1", "W3"),
            "M1": ("W3", "T"),
            "M2": ("W1", "M1"),
            "Y": ("M2",),
            "X3": ("T", "M1", "Y"),
        },
        intervene={"M1": 1},
        outcome={"Y": 1},
        observed={"Y": 1},
    ),
    "D": dict(
        names=("E", "F", "A", "B", "C", "D", "Y", "G"),
        parents={
            "A": ("E", "F"),
            "B": ("E", "F", "A"),
            "C": ("E", "F", "A", "B"),
            "D": ("E", "F", "A", "B", "C"),
            "Y": ("E", "D"),
            "G": ("E", "F", "A", "B", "C", "D", "Y"),
        },
        intervene={"D": 1},
        outcome={"Y": 1},
        observed={"Y": 1},
    ),
    # Listing order is not topological (F depends on G); nodes are reordered
    # here so that every parent precedes its children.
    "E": dict(
        names=("A", "B", "C", "D", "E", "G", "F", "Y"),
        parents={
            "C": ("A", "B"),
            "D": ("A", "B", "C"),
            "E": ("A", "B"),
            "G": ("A", "B", "C", "D"),
            "F": ("A", "B", "C", "D", "E", "G"),
            "Y": ("A", "B", "E", "F"),
        },
        intervene={"C": 1, "F": 1},
        outcome={"Y": 1},
        observed={"Y": 1},
    ),
    # The treatment chain T1 -> T2 -> T3 (and T1 -> T3) exists in the graph
    # but carries zero equation weight: the graph is strictly richer than the
    # equation system.
    "F": dict(
        names=("C1", "C2", "T1", "T2", "T3", "Y"),
        parents={
            "T1": ("C1", "C2"),
            "T2": ("C1", "C2", "T1"),
            "T3": ("C1", "C2", "T1", "T2"),
            "Y": ("C2", "T1", "T2", "T3"),
        },
        zero_edges={("T1", "T2"), ("T1", "T3"), ("T2", "T3")},
        intervene={"T1": 1, "T2": 1, "T3": 1},
        outcome={"Y": 1},
        observed={"Y": 1},
    ),
    "G": dict(
        names=("W1", "W2", "D", "A", "C", "B", "Y"),
        parents={
            "D": ("W1",),
            "A": ("W1", "D"),
            "C": ("W1", "D", "A"),
            "B": ("W1", "W2", "D", "A", "C"),
            "Y": ("W1", "D", "A", "C", "B"),
        },
        intervene={"B": 1},
        outcome={"Y": 1},
        observed={"Y": 1},
    ),
}

BUILTIN_IDS = tuple(sorted(_BUILTINS))


class BuiltinExample(NamedTuple):
    graph: CausalGraph
    query: Query
    observation: Observation
    model: StructuralModel


def _pairs(g: CausalGraph, d: dict[str, int]) -> Assignment:
    return Assignment.from_pairs([(g.index[name], v) for name, v in d.items()])


def builtin_example(example_id: str) -> BuiltinExample:
    """One of the seven builtin benchmark problems, by id ``A``..``G``.

    Returns the graph, the counterfactual query, the default conditioning
    event, and the structural model; all context nodes are set to 1 in both
    the query context and the conditioning event's context part.
    """
    key = example_id.strip().upper()
    if key not in _BUILTINS:
        raise KeyError(f"unknown builtin example {example_id!r}; choose from {BUILTIN_IDS}")
    return _builtin_example(key)


@functools.lru_cache(maxsize=None)
def _builtin_example(key: str) -> BuiltinExample:
    spec = _BUILTINS[key]
    names: tuple[str, ...] = spec["names"]
    n_ctx = 2  # every builtin problem has two context nodes, listed first
    index = {name: i for i, name in enumerate(names)}
    parents: list[tuple[int, ...]] = [() for _ in names]
    for child, pa in spec["parents"].items():
        parents[index[child]] = tuple(sorted(index[p] for p in pa))
    g = validate_graph(CausalGraph(names, (1 << n_ctx) - 1, tuple(parents)))
    zero_edges: set[tuple[str, str]] = spec.get("zero_edges", set())
    coeffs = tuple(
        tuple(0.0 if (names[p], names[j]) in zero_edges else 1.0 for p in parents[j])
        for j in range(g.n)
    )
    model = StructuralModel(graph=g, coeffs=coeffs, u_coeffs=tuple(1.0 for _ in names))
    context = Assignment(g.a_mask, g.a_mask)  # all context nodes equal to 1
    query = Query(
        intervene=_pairs(g, spec["intervene"]),
        outcome=_pairs(g, spec["outcome"]),
        context=context,
    )
    observation = Observation(observed=_pairs(g, spec["observed"]))
    return BuiltinExample(graph=g, query=query, observation=observation, model=model)


# ---------------------------------------------------------------------------
# one-stop generation for the CLI


@dataclass(frozen=True)
class InstanceSpec:
    """Fully seeded recipe for one benchmark instance."""

    example: str
    mode: str = "quadrature"
    seed: int = 0
    n_samples: int = DEFAULT_MC_SAMPLES
    quad_nodes: int = DEFAULT_QUADRATURE_NODES


def generate(spec: InstanceSpec) -> tuple[Problem, ProbabilityTable]:
    """Materialize one builtin problem and the table its spec asks for."""
    ex = builtin_example(spec.example)
    if spec.mode in ("quadrature", "monte-carlo"):
        table = table_from_model(
            ex.model,
            spec.mode,
            spec.seed,
            quad_nodes=spec.quad_nodes,
            n_samples=spec.n_samples,
        )
    elif spec.mode == "sem-random":
        table = random_instance(ex.model, spec.seed, "sem-random", quad_nodes=spec.quad_nodes)
    elif spec.mode == "dirichlet-random":
        table = random_instance(ex.graph, spec.seed, "dirichlet-random")
    else:
        raise ValueError(
            f"unknown instance mode {spec.mode!r} "
            "(quadrature | monte-carlo | sem-random | dirichlet-random)"
        )
    return Problem(graph=ex.graph, query=ex.query, observation=ex.observation), table
