"""Response-profile oracle: evaluation, membership, naive LPs, enumeration builders."""

from __future__ import annotations

import numpy as np
import pytest

from causalbounds.errors import (
    BudgetExceeded,
    CapExceeded,
    ObservationInvalidatesQuery,
)
from causalbounds.graph import (
    Assignment,
    CausalGraph,
    Observation,
    Query,
    validate_graph,
)
from causalbounds.hyperarcs import Hyperarc, build_pruned, build_pruned_observed, is_valid
from causalbounds.lp import solve
from causalbounds.responses import (
    Membership,
    build_naive_fractional_lp,
    build_naive_lp,
    build_pruned_by_enumeration,
    build_pruned_by_enumeration_observed,
    count_R,
    decode_response,
    encode_response,
    evaluate_FB,
    evaluate_intervened,
    membership,
    partition_check,
    response_space,
)


def iv_graph() -> CausalGraph:
    return validate_graph(
        CausalGraph(names=("Z", "X", "Y"), a_mask=0b001, parents=((), (0,), (1,)))
    )


def fig3_graph() -> CausalGraph:
    return validate_graph(
        CausalGraph(names=("Z", "X", "Y"), a_mask=0b001, parents=((), (0,), (0, 1)))
    )


def iv_query(g: CausalGraph) -> Query:
    return Query(
        intervene=Assignment.from_pairs([(1, 1)]),
        outcome=Assignment.from_pairs([(2, 1)]),
        context=Assignment.from_pairs([(0, 1)]),
    )


Z1 = Assignment.from_pairs([(0, 1)])

# Component encodings on the 3-node graphs (radix 4 per node; truth-table bit
# for parent pattern pi is bit pi of the component):
IDENTITY = 0b10   # maps 0 -> 0, 1 -> 1
NEGATION = 0b01   # maps 0 -> 1, 1 -> 0
CONST0 = 0b00
CONST1 = 0b11


def test_count_R_values():
    assert count_R(iv_graph()) == 16
    assert count_R(fig3_graph()) == 4 * 16  # radix 4 for X, 16 for two-parent Y
    # single endogenous node with k context parents
    for k in (1, 2, 3):
        names = tuple(f"A{i}" for i in range(k)) + ("B0",)
        parents = ((),) * k + (tuple(range(k)),)
        g = validate_graph(CausalGraph(names, (1 << k) - 1, parents))
        assert count_R(g) == 1 << (1 << k)


def test_encode_decode_round_trip():
    space = response_space(fig3_graph())
    assert space.radices == (4, 16)
    for r in range(space.size):
        assert encode_response(space, decode_response(space, r)) == r
    with pytest.raises(ValueError):
        decode_response(space, space.size)
    with pytest.raises(ValueError):
        encode_response(space, (4, 0))
    with pytest.raises(ValueError):
        encode_response(space, (0,))


def test_evaluate_identity_composition():
    space = response_space(iv_graph())
    out = evaluate_FB(space, Z1, (IDENTITY, IDENTITY))
    assert out.items() == [(1, 1), (2, 1)]  # X=1, Y=1


def test_evaluate_constant_then_negation():
    space = response_space(iv_graph())
    out = evaluate_FB(space, Z1, (CONST0, NEGATION))
    assert out.items() == [(1, 0), (2, 1)]  # X=0, Y=1


def test_evaluate_intervened_clamps_and_ignores_response():
    space = response_space(iv_graph())
    clamp_x1 = Assignment.from_pairs([(1, 1)])
    for r_x in range(4):
        out = evaluate_intervened(space, Z1, clamp_x1, (r_x, IDENTITY))
        assert out.value(1) == 1 and out.value(2) == 1
    # no clamping -> observational evaluation
    for r in range(16):
        assert evaluate_intervened(space, Z1, Assignment(), r) == evaluate_FB(space, Z1, r)


def test_evaluate_intervened_xor_case():
    # Outcome node computes Z XOR X; clamping X=1 at Z=1 gives 0.
    space = response_space(fig3_graph())
    xor = 0b0110
    out = evaluate_intervened(
        space, Z1, Assignment.from_pairs([(1, 1)]), (CONST0, xor)
    )
    assert out.value(2) == 0


def test_membership_iv_counts():
    g = iv_graph()
    space = response_space(g)
    q = iv_query(g)
    w = Observation(Assignment.from_pairs([(1, 0)]))
    flags = [membership(space, q, w, r) for r in range(16)]
    # query consistency is exactly "the outcome component maps 1 to 1"
    for r, m in enumerate(flags):
        r_x, r_y = decode_response(space, r)
        assert m.in_rq == bool(r_y >> 1 & 1)
        assert m.in_rw == (r_x >> 1 & 1 == 0)
    assert sum(m.in_rq for m in flags) == 8
    assert sum(m.in_rw for m in flags) == 8
    # without an observed event the flag is absent
    assert membership(space, q, None, 0).in_rw is None


def test_membership_cells_match_induced_table():
    g = iv_graph()
    space = response_space(g)
    q = iv_query(g)
    for r in range(16):
        m = membership(space, q, None, r)
        h = Hyperarc(table=m.cells)
        assert is_valid(h, g)
        for a_code, cell in enumerate(m.cells):
            ctx = Assignment(g.a_mask, g.mask_from_a_code(a_code))
            assert g.b_code(evaluate_FB(space, ctx, r).values) == cell


# ---------------------------------------------------------------------------
# naive LPs


def _iv_table(p11_at_z1: float = 0.4) -> np.ndarray:
    """A consistent IV probability table; cell order is b_code = X + 2 Y."""
    p = np.array(
        [
            [0.3, 0.2, 0.25, 0.25],
            [0.25, 0.15, 0.6 - p11_at_z1, p11_at_z1],
        ]
    )
    assert np.allclose(p.sum(axis=1), 1.0)
    return p


def test_naive_lp_shape_and_bounds():
    g = iv_graph()
    space = response_space(g)
    q = iv_query(g)
    p = _iv_table()
    lo = solve(build_naive_lp(space, q, p, "min"))
    hi = solve(build_naive_lp(space, q, p, "max"))
    lp = build_naive_lp(space, q, p, "min")
    assert lp.n == 16 and lp.m == 8
    assert 0.0 <= lo.value <= hi.value <= 1.0 + 1e-9


def test_naive_lp_point_mass_gives_binary_bounds():
    g = iv_graph()
    space = response_space(g)
    q = iv_query(g)
    for table, expect in ((Hyperarc((0, 3)), (1.0, 1.0)), (Hyperarc((0, 0)), (0.0, 1.0))):
        p = np.zeros((2, 4))
        p[0, table.table[0]] = 1.0
        p[1, table.table[1]] = 1.0
        lo = solve(build_naive_lp(space, q, p, "min")).value
        hi = solve(build_naive_lp(space, q, p, "max")).value
        assert (round(lo, 9), round(hi, 9)) == expect


def test_naive_fractional_lp_structure_and_range():
    g = iv_graph()
    space = response_space(g)
    q = iv_query(g)
    w = Observation(Assignment.from_pairs([(1, 0)]))
    p = _iv_table()
    lp = build_naive_fractional_lp(space, q, w, p, "max")
    assert lp.n == 17  # 16 profile variables plus the scale variable
    lo = solve(build_naive_fractional_lp(space, q, w, p, "min")).value
    hi = solve(lp).value
    assert -1e-9 <= lo <= hi <= 1.0 + 1e-9


def test_naive_fractional_lp_detects_invalidated_query():
    g = iv_graph()
    space = response_space(g)
    q = iv_query(g)
    # Observing X=1, Y=0 forces the outcome function to map 1 to 0,
    # contradicting every query-consistent profile.
    w = Observation(Assignment.from_pairs([(1, 1), (2, 0)]))
    with pytest.raises(ObservationInvalidatesQuery):
        build_naive_fractional_lp(space, q, w, _iv_table(), "max")


def test_cap_exceeded_reports_exact_size():
    space = response_space(iv_graph())
    with pytest.raises(CapExceeded) as exc:
        build_naive_lp(space, iv_query(space.graph), _iv_table(), "min", r_cap=8)
    assert exc.value.size == 16 and exc.value.cap == 8


# ---------------------------------------------------------------------------
# enumeration builders vs direct construction


def test_enumeration_matches_direct_on_iv():
    g = iv_graph()
    space = response_space(g)
    q = iv_query(g)
    bench = build_pruned_by_enumeration(space, q)
    direct = build_pruned(g, q)
    assert np.array_equal(bench.tables, direct.tables)
    assert np.array_equal(bench.obj_lower, direct.obj_lower)
    assert np.array_equal(bench.obj_upper, direct.obj_upper)
    assert bench.class_sizes is not None
    assert int(bench.class_sizes.sum()) == 16
    assert bench.size == 12


def test_enumeration_matches_direct_on_fig3():
    g = fig3_graph()
    space = response_space(g)
    q = iv_query(g)
    bench = build_pruned_by_enumeration(space, q)
    direct = build_pruned(g, q)
    assert np.array_equal(bench.tables, direct.tables)
    assert np.array_equal(bench.obj_lower, direct.obj_lower)
    assert np.array_equal(bench.obj_upper, direct.obj_upper)
    assert int(bench.class_sizes.sum()) == 64


def test_enumeration_observed_matches_direct_on_iv():
    g = iv_graph()
    space = response_space(g)
    q = iv_query(g)
    w = Observation(Assignment.from_pairs([(1, 0)]))
    bench = build_pruned_by_enumeration_observed(space, q, w)
    direct = build_pruned_observed(g, q, w)
    for field in ("tables", "obj_lower", "obj_upper", "in_rw", "obs_lower", "obs_upper"):
        assert np.array_equal(getattr(bench, field), getattr(direct, field)), field


def test_enumeration_observed_empty_event():
    g = iv_graph()
    space = response_space(g)
    q = iv_query(g)
    bench = build_pruned_by_enumeration_observed(space, q, Observation())
    assert np.all(bench.in_rw == 1)
    assert np.array_equal(bench.obs_lower, bench.obj_lower)
    assert np.array_equal(bench.obs_upper, bench.obj_upper)


def test_enumeration_worker_partitioning_is_invisible():
    g = fig3_graph()
    space = response_space(g)
    q = iv_query(g)
    w = Observation(Assignment.from_pairs([(2, 1)]))
    one = build_pruned_by_enumeration_observed(space, q, w, workers=1)
    many = build_pruned_by_enumeration_observed(space, q, w, workers=3)
    for field in ("tables", "obj_lower", "obj_upper", "in_rw", "obs_lower", "obs_upper", "class_sizes"):
        assert np.array_equal(getattr(one, field), getattr(many, field)), field


def test_enumeration_budget_exceeded():
    g = fig3_graph()
    space = response_space(g)
    with pytest.raises(BudgetExceeded) as exc:
        build_pruned_by_enumeration(space, iv_query(g), budget_s=0.0)
    assert exc.value.budget_s == 0.0
    assert 0.0 <= exc.value.progress <= 1.0


# ---------------------------------------------------------------------------
# partition structure


def test_partition_check_iv_and_fig3():
    assert partition_check(response_space(iv_graph()))
    assert partition_check(response_space(fig3_graph()))


def test_partition_check_random_graphs():
    rng = np.random.default_rng(2024)
    for _ in range(10):
        n_a = int(rng.integers(1, 3))
        n_b = int(rng.integers(1, 4))
        names = tuple(f"A{i}" for i in range(n_a)) + tuple(f"B{i}" for i in range(n_b))
        parents: list[tuple[int, ...]] = [() for _ in names]
        for k in range(n_b):
            node = n_a + k
            pool = list(range(node))
            take = rng.permutation(len(pool))[: int(rng.integers(0, min(3, len(pool)) + 1))]
            parents[node] = tuple(sorted(pool[t] for t in take))
        # ensure each context node has a child
        for i in range(n_a):
            if not any(i in pa for pa in parents):
                parents[n_a] = tuple(sorted(set(parents[n_a]) | {i}))
        g = validate_graph(CausalGraph(names, (1 << n_a) - 1, tuple(parents)))
        assert partition_check(response_space(g))
