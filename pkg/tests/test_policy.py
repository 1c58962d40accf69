import itertools
import math

import numpy as np
import pytest

from blowfish import (
    BudgetExceededError,
    ConstraintSet,
    CountQuery,
    InfeasibleConstraintsError,
    Policy,
    SecretGraph,
    check_parallel_decomposition,
    enumerate_databases,
    enumerate_neighbors,
    graph_distance,
    is_edge,
    load_domain,
    load_policy,
)

from oracles import bfs_graph_distance, neighbors_by_definition

INF = math.inf


def line_domain(size, name="x"):
    return load_domain({"attributes": [{"name": name, "values": [str(i) for i in range(size)], "ordinal": True}]})


def grid_domain(*sizes):
    attrs = [{"name": f"A{i}", "values": [f"v{j}" for j in range(s)]} for i, s in enumerate(sizes)]
    return load_domain({"attributes": attrs})


# -- edges and distances ------------------------------------------------------


def test_is_edge_examples():
    dom = grid_domain(2, 2)
    full = SecretGraph.full(dom)
    assert is_edge(full, (0, 0), (1, 1))
    assert not is_edge(full, (0, 0), (0, 0))

    attr = SecretGraph.attribute(dom)
    assert is_edge(attr, (0, 0), (0, 1))
    assert not is_edge(attr, (0, 0), (1, 1))

    line = line_domain(5)
    g1 = SecretGraph.distance(line, 1)
    assert is_edge(g1, (0,), (1,))
    assert not is_edge(g1, (0,), (2,))


def test_is_edge_symmetric_and_irreflexive():
    rng = np.random.default_rng(3)
    dom = grid_domain(2, 3)
    graphs = [
        SecretGraph.full(dom),
        SecretGraph.attribute(dom),
        SecretGraph.distance(dom, 2),
        SecretGraph.partition(dom, [[0, 1, 2], [3, 4, 5]]),
        SecretGraph.explicit(dom, [(0, 3), (1, 4), (2, 5)]),
    ]
    for g in graphs:
        for _ in range(50):
            x = dom.unrank(int(rng.integers(dom.size)))
            y = dom.unrank(int(rng.integers(dom.size)))
            assert is_edge(g, x, y) == is_edge(g, y, x)
            assert not is_edge(g, x, x)


def test_graph_distance_examples():
    line = line_domain(5)
    g = SecretGraph.distance(line, 1)
    assert graph_distance(g, (0,), (4,)) == 4

    dom = grid_domain(2, 2)
    part = SecretGraph.partition(dom, [[0, 1], [2, 3]])
    assert graph_distance(part, (0, 0), (1, 0)) == INF
    assert graph_distance(part, (0, 0), (0, 1)) == 1

    full = SecretGraph.full(dom)
    assert graph_distance(full, (0, 0), (1, 1)) == 1
    assert graph_distance(full, (0, 1), (0, 1)) == 0


def test_graph_distance_matches_bfs():
    rng = np.random.default_rng(4)
    doms = [line_domain(200), grid_domain(6, 5), grid_domain(3, 3, 3)]
    for dom in doms:
        graphs = [
            SecretGraph.attribute(dom),
            SecretGraph.distance(dom, int(rng.integers(1, 5))),
        ]
        if dom.size <= 30:
            ncells = int(rng.integers(1, 4))
            groups = {}
            for r in range(dom.size):
                groups.setdefault(int(rng.integers(ncells)), []).append(r)
            graphs.append(SecretGraph.partition(dom, list(groups.values())))
            pairs = list(itertools.combinations(range(dom.size), 2))
            idx = rng.choice(len(pairs), size=min(40, len(pairs)), replace=False)
            graphs.append(SecretGraph.explicit(dom, [pairs[i] for i in idx]))
        for g in graphs:
            mat = g.edge_matrix()
            for _ in range(25):
                a, b = int(rng.integers(dom.size)), int(rng.integers(dom.size))
                assert graph_distance(g, dom.unrank(a), dom.unrank(b)) == bfs_graph_distance(mat, a, b)


# -- constraints and policy files ---------------------------------------------


def test_count_query_matching():
    dom = grid_domain(2, 3)
    q = CountQuery.from_labels(dom, {"A0": ["v1"]}, answer=2)
    assert q.matches((1, 0)) and q.matches((1, 2))
    assert not q.matches((0, 0))
    assert q.support_size(dom) == 3
    rect = CountQuery.rectangle(dom, {"A1": (0, 1)})
    assert rect.is_rectangle() and not rect.is_point_query(dom)
    point = CountQuery.rectangle(dom, {"A0": (1, 1), "A1": (2, 2)})
    assert point.is_point_query(dom)
    with pytest.raises(ValueError):
        CountQuery.rectangle(dom, {"A1": (2, 5)})


def test_load_policy_round_trip():
    dom = grid_domain(2, 3)
    pol = load_policy(
        {
            "graph": {"kind": "distance", "theta": 2},
            "constraints": {
                "kind": "general",
                "queries": [
                    {"where": {"A0": ["v0"]}, "answer": 1},
                    {"where": {"A1": {"range": [0, 1]}}},
                ],
            },
        },
        dom,
    )
    assert pol.graph.theta == 2
    assert len(pol.constraints.queries) == 2
    assert pol.constraints.queries[0].answer == 1
    assert pol.constraints.queries[1].answer is None
    assert pol.describe() == "distance(theta=2)|general(q=2)"

    unconstrained = load_policy({"graph": {"kind": "full"}}, dom)
    assert unconstrained.constraints.unconstrained

    with pytest.raises(ValueError):
        load_policy({"graph": {"kind": "banana"}}, dom)
    with pytest.raises(ValueError):
        load_policy("{bad json", dom)


# -- neighbor enumeration -----------------------------------------------------


def test_neighbors_single_tuple_two_values():
    dom = line_domain(2)
    pol = Policy(dom, SecretGraph.full(dom), ConstraintSet.none())
    pairs = {(p.d1, p.d2) for p in enumerate_neighbors(pol, 1)}
    assert pairs == {((0,), (1,)), ((1,), (0,))}


def test_neighbors_swap_under_count_constraint():
    dom = line_domain(2)
    q = CountQuery.from_labels(dom, {"x": ["1"]}, answer=1)
    pol = Policy(dom, SecretGraph.full(dom), ConstraintSet.of([q]))
    pairs = enumerate_neighbors(pol, 2)
    assert {(p.d1, p.d2) for p in pairs} == {((0, 1), (1, 0)), ((1, 0), (0, 1))}
    assert all(len(p.t_set) == 2 for p in pairs)
    assert all(p.delta == 4 for p in pairs)


def test_partition_cross_pair_not_neighbor():
    dom = line_domain(4)
    part = SecretGraph.partition(dom, [[0, 1], [2, 3]])
    pol = Policy(dom, part, ConstraintSet.none())
    pairs = {(p.d1, p.d2) for p in enumerate_neighbors(pol, 1)}
    assert ((0,), (2,)) not in pairs
    assert ((0,), (1,)) in pairs


def test_unconstrained_neighbors_equal_direct_construction():
    rng = np.random.default_rng(5)
    dom = grid_domain(2, 3)
    graphs = [
        SecretGraph.full(dom),
        SecretGraph.attribute(dom),
        SecretGraph.distance(dom, 2),
        SecretGraph.partition(dom, [[0, 1, 2], [3, 4, 5]]),
    ]
    for g in graphs:
        pol = Policy(dom, g, ConstraintSet.none())
        n = int(rng.integers(1, 3))
        got = {(p.d1, p.d2) for p in enumerate_neighbors(pol, n)}
        mat = g.edge_matrix()
        expected = set()
        for db in itertools.product(range(dom.size), repeat=n):
            for i in range(n):
                for v in range(dom.size):
                    if mat[db[i]][v]:
                        other = list(db)
                        other[i] = v
                        expected.add((db, tuple(other)))
        assert got == expected


def test_neighbors_match_independent_validator():
    dom = grid_domain(2, 2)
    g = SecretGraph.attribute(dom)
    queries = [
        CountQuery.from_labels(dom, {"A0": ["v0"]}, answer=1),
        CountQuery.from_labels(dom, {"A0": ["v1"]}, answer=1),
    ]
    pol = Policy(dom, g, ConstraintSet.of(queries))
    got = {(p.d1, p.d2) for p in enumerate_neighbors(pol, 2)}
    assert got == neighbors_by_definition(pol, 2)

    line = line_domain(4)
    pol2 = Policy(
        line,
        SecretGraph.distance(line, 2),
        ConstraintSet.of([CountQuery.rectangle(line, {"x": (1, 2)}, answer=1)]),
    )
    got2 = {(p.d1, p.d2) for p in enumerate_neighbors(pol2, 2)}
    assert got2 == neighbors_by_definition(pol2, 2)


def test_enumeration_errors():
    dom = line_domain(10)
    pol = Policy(dom, SecretGraph.full(dom), ConstraintSet.none())
    with pytest.raises(BudgetExceededError):
        enumerate_databases(pol, 7, budget=1000)
    q = CountQuery.from_labels(dom, {"x": ["0"]}, answer=5)
    infeasible = Policy(dom, SecretGraph.full(dom), ConstraintSet.of([q]))
    with pytest.raises(InfeasibleConstraintsError):
        enumerate_databases(infeasible, 2)


# -- parallel decomposition ---------------------------------------------------


def test_parallel_decomposition_disconnected_components():
    dom = grid_domain(2, 2)
    # cells aligned with A0: counting either side never crosses an edge
    part = SecretGraph.partition(dom, [[0, 1], [2, 3]])
    q_s = CountQuery.from_labels(dom, {"A0": ["v0"]}, answer=1)
    q_rest = CountQuery.from_labels(dom, {"A0": ["v1"]}, answer=1)
    pol = Policy(dom, part, ConstraintSet.of([q_s, q_rest]))
    assert check_parallel_decomposition(pol, [{0}, {1}], n=2)


def test_parallel_decomposition_marginal_full_graph_fails():
    dom = grid_domain(2, 2)
    g = SecretGraph.full(dom)
    q_m = CountQuery.from_labels(dom, {"A0": ["v0"]}, answer=1)
    q_f = CountQuery.from_labels(dom, {"A0": ["v1"]}, answer=1)
    pol = Policy(dom, g, ConstraintSet.of([q_m, q_f]))
    assert not check_parallel_decomposition(pol, [{0}, {1}], n=2)
    # a single non-empty subset is fine
    assert check_parallel_decomposition(pol, [{0, 1}], n=2)


def test_parallel_decomposition_cardinality_only():
    dom = grid_domain(2, 2)
    pol = Policy(dom, SecretGraph.full(dom), ConstraintSet.cardinality_only())
    assert check_parallel_decomposition(pol, [{0}, {1}, {2}], n=3)
    with pytest.raises(ValueError):
        check_parallel_decomposition(pol, [{0, 1}, {1, 2}], n=3)
