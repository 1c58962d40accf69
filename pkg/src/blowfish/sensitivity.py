"""Policy-specific global sensitivity.

Three routes are provided and kept deliberately independent of each other:

* closed forms for unconstrained policies, per query kind and graph kind;
* the sparse count-constraint engine, which builds a directed policy graph
  over the constraint queries and bounds the histogram sensitivity by twice
  the larger of its longest simple cycle and its longest source-to-sink path;
* specialized exact formulas for three recognized constraint shapes
  (one marginal with full-domain secrets, disjoint marginals with attribute
  secrets, disjoint rectangles with distance-threshold secrets);
* a brute-force oracle that enumerates neighbors and maximizes the actual
  query difference, used to certify the other routes at tiny scale.

Sensitivities are in L1, measured across the policy's neighbor relation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .domain import DomainSpec, Point, l1_distance
from .errors import (
    BudgetExceededError,
    NonSparseConstraintsError,
    ShapeNotRecognizedError,
)
from .policy import (
    DEFAULT_EDGE_BUDGET,
    DEFAULT_ENUM_BUDGET,
    ConstraintSet,
    CountQuery,
    GraphKind,
    Policy,
    SecretGraph,
    iter_graph_edges,
    neighbor_databases,
)

MAX_POLICY_GRAPH_VERTICES = 16


# -- query kinds -------------------------------------------------------------


@dataclass(frozen=True)
class HistogramQuery:
    """Complete histogram over the domain."""


@dataclass(frozen=True)
class PartitionHistogramQuery:
    """Histogram over a coarser partition, given as a cell id per rank."""

    cells: tuple[int, ...]


@dataclass(frozen=True)
class CumulativeQuery:
    """Prefix-sum vector of the complete histogram in rank order."""


@dataclass(frozen=True)
class LinearSumQuery:
    """Weighted sum over a 1-D-ordered domain mapped onto [lo, hi].

    Tuple i contributes weights[i] * value(x_i) where value maps rank r to
    lo + r * (hi - lo) / (|domain| - 1).
    """

    weights: tuple[float, ...]
    lo: float = 0.0
    hi: float = 1.0

    def value_step(self, domain: DomainSpec) -> float:
        if domain.size == 1:
            return 0.0
        return (self.hi - self.lo) / (domain.size - 1)


@dataclass(frozen=True)
class ClusterSizeQuery:
    """Per-cluster point counts, worst case over assignments of domain values
    to k clusters."""

    k: int


@dataclass(frozen=True)
class ClusterSumQuery:
    """Per-cluster coordinate sums for k clusters.

    The calibration quantity is twice the L1 displacement of a changed tuple:
    a change can move mass out of one cluster and into another, each side by
    up to the displacement when sums are accounted from the cluster boundary.
    """

    k: int


QueryKind = (
    HistogramQuery
    | PartitionHistogramQuery
    | CumulativeQuery
    | LinearSumQuery
    | ClusterSizeQuery
    | ClusterSumQuery
)


class Exactness(str, Enum):
    EXACT = "Exact"
    UPPER_BOUND = "UpperBound"


class Method(str, Enum):
    CLOSED_FORM = "ClosedForm"
    SPARSE_ENGINE = "SparseEngine"
    SPECIALIZED = "Specialized"
    BRUTE_FORCE = "BruteForce"


@dataclass(frozen=True)
class SensitivityResult:
    value: float
    exactness: Exactness
    method: Method

    def __post_init__(self) -> None:
        if not (self.value >= 0):
            raise ValueError("sensitivity must be non-negative")


# -- closed forms (unconstrained policies) ------------------------------------


def _max_edge_rank_gap(g: SecretGraph) -> int:
    """max |rank(x) - rank(y)| over edges of g; 0 if g has no edges."""
    domain = g.domain
    if not g.has_any_edge():
        return 0
    if g.kind is GraphKind.FULL:
        return domain.size - 1
    if g.kind is GraphKind.ATTRIBUTE:
        return max((a.size - 1) * w for a, w in zip(domain.attributes, domain._weights))
    if g.kind is GraphKind.PARTITION:
        lo: dict[int, int] = {}
        hi: dict[int, int] = {}
        for r, c in enumerate(g.cells):
            lo.setdefault(c, r)
            hi[c] = r
        return max(hi[c] - lo[c] for c in lo)
    if g.kind is GraphKind.DISTANCE:
        # maximize sum of d_i * weight_i subject to sum d_i <= theta,
        # 0 <= d_i <= |A_i| - 1: greedy on the largest place values
        budget = g.theta
        gap = 0
        dims = sorted(
            zip(domain._weights, (a.size - 1 for a in domain.attributes)), reverse=True
        )
        for w, span in dims:
            take = min(budget, span)
            gap += take * w
            budget -= take
            if budget == 0:
                break
        return gap
    return max(abs(a - b) for a, b in g.edge_list)


def _max_edge_l1(g: SecretGraph, pair_budget: int = DEFAULT_EDGE_BUDGET) -> int:
    """max L1 length of an edge of g; 0 if g has no edges."""
    domain = g.domain
    if not g.has_any_edge():
        return 0
    if g.kind is GraphKind.FULL:
        return domain.diameter()
    if g.kind is GraphKind.ATTRIBUTE:
        return max(a.size - 1 for a in domain.attributes)
    if g.kind is GraphKind.DISTANCE:
        return min(g.theta, domain.diameter())
    if g.kind is GraphKind.PARTITION:
        groups: dict[int, list[Point]] = {}
        for r, c in enumerate(g.cells):
            groups.setdefault(c, []).append(domain.unrank(r))
        if sum(len(v) ** 2 for v in groups.values()) > pair_budget:
            raise BudgetExceededError("partition cell diameter scan exceeds budget")
        best = 0
        for pts in groups.values():
            for i, x in enumerate(pts):
                for y in pts[i + 1 :]:
                    best = max(best, l1_distance(x, y))
        return best
    return max(
        l1_distance(domain.unrank(a), domain.unrank(b)) for a, b in g.edge_list
    )


def _partition_query_crossed(g: SecretGraph, cells: tuple[int, ...]) -> bool:
    """Whether some edge of g joins two different cells of the query partition."""
    domain = g.domain
    if not g.has_any_edge():
        return False
    if g.kind is GraphKind.FULL:
        return len(set(cells)) >= 2
    if g.kind is GraphKind.PARTITION:
        groups: dict[int, set[int]] = {}
        for r, gc in enumerate(g.cells):
            groups.setdefault(gc, set()).add(cells[r])
        return any(len(v) >= 2 for v in groups.values())
    if g.kind in (GraphKind.ATTRIBUTE, GraphKind.DISTANCE):
        # one unit step along a single attribute is an edge for both kinds
        # (distance needs theta >= 1, guaranteed by has_any_edge)
        for r in range(domain.size):
            point = domain.unrank(r)
            for i, w in enumerate(domain._weights):
                if point[i] + 1 < domain.attributes[i].size:
                    if cells[r] != cells[r + w]:
                        return True
        if g.kind is GraphKind.ATTRIBUTE:
            return False
        # wider theta jumps can cross cells even if unit steps do not
        if g.theta == 1:
            return False
        return any(cells[a] != cells[b] for a, b in iter_graph_edges(g))
    return any(cells[a] != cells[b] for a, b in g.edge_list)


def closed_form_sensitivity(query: QueryKind, policy: Policy) -> SensitivityResult:
    """Exact sensitivity for unconstrained policies (no general constraints)."""
    if not policy.constraints.unconstrained:
        raise ValueError("closed forms require an unconstrained policy; use the constraint engine")
    g = policy.graph
    if isinstance(query, HistogramQuery):
        value = 2.0 if g.has_any_edge() else 0.0
    elif isinstance(query, PartitionHistogramQuery):
        if len(query.cells) != policy.domain.size:
            raise ValueError("partition query needs one cell id per rank")
        value = 2.0 if _partition_query_crossed(g, query.cells) else 0.0
    elif isinstance(query, CumulativeQuery):
        value = float(_max_edge_rank_gap(g))
    elif isinstance(query, LinearSumQuery):
        wmax = max((abs(w) for w in query.weights), default=0.0)
        value = _max_edge_rank_gap(g) * query.value_step(policy.domain) * wmax
    elif isinstance(query, ClusterSizeQuery):
        if query.k < 1:
            raise ValueError("k must be >= 1")
        value = 2.0 if query.k >= 2 and g.has_any_edge() else 0.0
    elif isinstance(query, ClusterSumQuery):
        if query.k < 1:
            raise ValueError("k must be >= 1")
        length = _max_edge_l1(g)
        value = float(length if query.k == 1 else 2 * length)
    else:
        raise TypeError(f"unknown query kind {type(query).__name__}")
    return SensitivityResult(value=value, exactness=Exactness.EXACT, method=Method.CLOSED_FORM)


# -- sparse constraint engine --------------------------------------------------


class Effect(str, Enum):
    LIFTS = "Lifts"
    LOWERS = "Lowers"
    NEITHER = "Neither"


def lifts_lowers(pair: tuple[Point, Point], q: CountQuery) -> Effect:
    """Effect of changing a tuple from pair[0] to pair[1] on the count query."""
    x, y = pair
    mx, my = q.matches(x), q.matches(y)
    if not mx and my:
        return Effect.LIFTS
    if mx and not my:
        return Effect.LOWERS
    return Effect.NEITHER


def is_sparse(
    constraints: ConstraintSet, g: SecretGraph, budget: int = DEFAULT_EDGE_BUDGET
) -> bool:
    """Whether every secret-graph edge lifts at most one query and lowers at
    most one query of the constraint set."""
    queries = constraints.queries
    if not queries:
        return True
    domain = g.domain
    points = [domain.unrank(r) for r in range(domain.size)]
    for x_rank, y_rank in iter_graph_edges(g, budget):
        lifts = 0
        lowers = 0
        for q in queries:
            eff = lifts_lowers((points[x_rank], points[y_rank]), q)
            if eff is Effect.LIFTS:
                lifts += 1
                if lifts > 1:
                    return False
            elif eff is Effect.LOWERS:
                lowers += 1
                if lowers > 1:
                    return False
    return True


@dataclass(frozen=True)
class PolicyGraph:
    """Directed graph over constraint queries plus source/sink sentinels.

    Vertices 0..n_queries-1 are the queries, then source (lift without lower)
    and sink (lower without lift).  The (source, sink) edge is always present.
    Each query-to-query edge stores one witnessing secret pair of ranks.
    """

    n_queries: int
    edges: frozenset[tuple[int, int]]
    witnesses: tuple[tuple[tuple[int, int], tuple[int, int]], ...] = ()

    @property
    def source(self) -> int:
        return self.n_queries

    @property
    def sink(self) -> int:
        return self.n_queries + 1

    @property
    def n_vertices(self) -> int:
        return self.n_queries + 2

    def witness(self, edge: tuple[int, int]) -> tuple[int, int] | None:
        for e, w in self.witnesses:
            if e == edge:
                return w
        return None


def build_policy_graph(
    constraints: ConstraintSet, g: SecretGraph, budget: int = DEFAULT_EDGE_BUDGET
) -> PolicyGraph:
    """Construct the policy graph of a sparse constraint set.

    Raises NonSparseConstraintsError if some edge lifts or lowers more than
    one query (detected during the same scan).
    """
    queries = constraints.queries
    nq = len(queries)
    domain = g.domain
    points = [domain.unrank(r) for r in range(domain.size)]
    edges: set[tuple[int, int]] = set()
    witnesses: dict[tuple[int, int], tuple[int, int]] = {}
    source, sink = nq, nq + 1
    for x_rank, y_rank in iter_graph_edges(g, budget):
        lift_idx: list[int] = []
        lower_idx: list[int] = []
        for qi, q in enumerate(queries):
            eff = lifts_lowers((points[x_rank], points[y_rank]), q)
            if eff is Effect.LIFTS:
                lift_idx.append(qi)
            elif eff is Effect.LOWERS:
                lower_idx.append(qi)
        if len(lift_idx) > 1 or len(lower_idx) > 1:
            raise NonSparseConstraintsError(
                f"secret pair (ranks {x_rank},{y_rank}) lifts {len(lift_idx)} and "
                f"lowers {len(lower_idx)} queries"
            )
        if lift_idx and lower_idx:
            e = (lower_idx[0], lift_idx[0])
        elif lift_idx:
            e = (source, lift_idx[0])
        elif lower_idx:
            e = (lower_idx[0], sink)
        else:
            continue
        if e[0] != e[1] and e not in edges:
            edges.add(e)
            witnesses[e] = (x_rank, y_rank)
    edges.add((source, sink))
    return PolicyGraph(
        n_queries=nq,
        edges=frozenset(edges),
        witnesses=tuple(sorted(witnesses.items())),
    )


def _adjacency(pg: PolicyGraph) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(pg.n_vertices)]
    for u, v in sorted(pg.edges):
        adj[u].append(v)
    return adj


def alpha_xi(pg: PolicyGraph) -> tuple[int, int]:
    """Longest simple cycle length and longest source-to-sink simple path length.

    Exhaustive subset dynamic program, so the graph is capped at 16 vertices.
    The cycle length is 0 for acyclic graphs; the path length is at least 1
    because the (source, sink) edge always exists.
    """
    nv = pg.n_vertices
    if nv > MAX_POLICY_GRAPH_VERTICES:
        raise BudgetExceededError(
            f"policy graph has {nv} vertices, exhaustive search capped at "
            f"{MAX_POLICY_GRAPH_VERTICES}"
        )
    adj = _adjacency(pg)
    alpha = 0
    # cycles live among query vertices only (sentinels are one-sided);
    # dedupe by rooting each cycle at its smallest vertex
    for start in range(pg.n_queries):
        # dp maps (visited mask, last vertex) over vertices >= start
        frontier = {(1 << start, start)}
        seen = set(frontier)
        while frontier:
            nxt = set()
            for mask, last in frontier:
                for w in adj[last]:
                    if w == start:
                        alpha = max(alpha, mask.bit_count())
                    elif w >= start and w < pg.n_queries and not (mask >> w) & 1:
                        state = (mask | (1 << w), w)
                        if state not in seen:
                            seen.add(state)
                            nxt.add(state)
            frontier = nxt
    xi = 0
    frontier = {(1 << pg.source, pg.source)}
    seen = set(frontier)
    while frontier:
        nxt = set()
        for mask, last in frontier:
            for w in adj[last]:
                if w == pg.sink:
                    xi = max(xi, mask.bit_count())
                elif not (mask >> w) & 1:
                    state = (mask | (1 << w), w)
                    if state not in seen:
                        seen.add(state)
                        nxt.add(state)
        frontier = nxt
    return alpha, xi


def sparse_constraint_sensitivity(
    policy: Policy,
    budget: int = DEFAULT_EDGE_BUDGET,
    certify_n: int | None = None,
) -> SensitivityResult:
    """Histogram sensitivity bound 2*max(alpha, xi) from the policy graph.

    The result is an upper bound; pass ``certify_n`` to run the brute-force
    oracle at that database size and upgrade the tag to Exact when the bound
    is attained.  The bound never exceeds 2*(|Q| + 1): cycles visit only
    query vertices and a source-to-sink path visits each query at most once.
    """
    if policy.constraints.unconstrained:
        raise ValueError("policy has no general constraints; use closed_form_sensitivity")
    pg = build_policy_graph(policy.constraints, policy.graph, budget)
    alpha, xi = alpha_xi(pg)
    value = 2.0 * max(alpha, xi)
    exactness = Exactness.UPPER_BOUND
    if certify_n is not None:
        oracle = brute_force_sensitivity(HistogramQuery(), policy, certify_n)
        if oracle.value == value:
            exactness = Exactness.EXACT
    return SensitivityResult(value=value, exactness=exactness, method=Method.SPARSE_ENGINE)


# -- specialized shapes --------------------------------------------------------


def _marginal_attrs(q: CountQuery, domain: DomainSpec) -> tuple[int, ...] | None:
    """Indices of attributes pinned to single values, or None if q is not a
    marginal cell (some constrained attribute allows several values)."""
    pinned = []
    for i, s in enumerate(q.allowed):
        if s is None:
            continue
        if len(s) == 1:
            pinned.append(i)
        else:
            return None
    return tuple(pinned)


def _as_marginals(queries, domain: DomainSpec) -> list[tuple[tuple[int, ...], int]] | None:
    """Group queries into complete marginals: [(attr index set, size)] or None.

    A complete marginal over attributes S contributes exactly one cell query
    per value combination of S.
    """
    by_attrs: dict[tuple[int, ...], set[tuple[int, ...]]] = {}
    for q in queries:
        attrs = _marginal_attrs(q, domain)
        if attrs is None or not attrs:
            return None
        cell = tuple(next(iter(q.allowed[i])) for i in attrs)
        cells = by_attrs.setdefault(attrs, set())
        if cell in cells:
            return None
        cells.add(cell)
    out = []
    for attrs, cells in by_attrs.items():
        size = math.prod(domain.attributes[i].size for i in attrs)
        if len(cells) != size:
            return None
        out.append((attrs, size))
    return out


def _rect_bounds(q: CountQuery, domain: DomainSpec) -> tuple[tuple[int, int], ...]:
    out = []
    for s, attr in zip(q.allowed, domain.attributes):
        if s is None:
            out.append((0, attr.size - 1))
        else:
            vals = sorted(s)
            out.append((vals[0], vals[-1]))
    return tuple(out)


def _rect_distance(a, b) -> int:
    """Min L1 distance between two axis-aligned boxes."""
    d = 0
    for (alo, ahi), (blo, bhi) in zip(a, b):
        if ahi < blo:
            d += blo - ahi
        elif bhi < alo:
            d += alo - bhi
    return d


def _rects_disjoint(a, b) -> bool:
    return any(ahi < blo or bhi < alo for (alo, ahi), (blo, bhi) in zip(a, b))


def _has_hamiltonian_path(nodes: list[int], adj: dict[int, set[int]]) -> bool:
    """Undirected Hamiltonian path check by subset DP (components are small)."""
    k = len(nodes)
    if k <= 2:
        return True
    index = {v: i for i, v in enumerate(nodes)}
    reach = [set() for _ in range(1 << k)]
    for i in range(k):
        reach[1 << i].add(i)
    for mask in range(1 << k):
        for last in list(reach[mask]):
            for w in adj[nodes[last]]:
                j = index[w]
                if not (mask >> j) & 1:
                    reach[mask | (1 << j)].add(j)
    return bool(reach[(1 << k) - 1])


def specialized_constraint_sensitivity(policy: Policy) -> SensitivityResult:
    """Exact histogram sensitivity for the three recognized constraint shapes.

    (a) one complete marginal, full-domain secrets: 2 * size(marginal);
    (b) pairwise-disjoint complete marginals, attribute secrets:
        2 * max size;
    (c) pairwise-disjoint rectangles, distance-threshold secrets:
        2 * (largest proximity component + 1), exact when no rectangle is a
        point query and the largest components admit a Hamiltonian path in
        the proximity graph (otherwise an upper bound).

    Raises ShapeNotRecognizedError when the policy fits none of these.
    """
    if policy.constraints.unconstrained:
        raise ValueError("policy has no general constraints")
    domain = policy.domain
    g = policy.graph
    queries = policy.constraints.queries
    if not queries:
        raise ShapeNotRecognizedError("empty constraint set")

    if g.kind in (GraphKind.FULL, GraphKind.ATTRIBUTE):
        marginals = _as_marginals(queries, domain)
        if marginals is None:
            raise ShapeNotRecognizedError("constraints are not complete marginals")
        all_attrs = set(range(domain.n_attributes))
        for attrs, _ in marginals:
            if set(attrs) == all_attrs:
                raise ShapeNotRecognizedError("marginal covers every attribute")
            # the matching construction varies the unconstrained attributes
            rest = math.prod(
                domain.attributes[i].size for i in all_attrs - set(attrs)
            )
            if rest < 2:
                raise ShapeNotRecognizedError("degenerate marginal complement")
        if g.kind is GraphKind.FULL:
            if len(marginals) != 1:
                raise ShapeNotRecognizedError(
                    "full-domain secrets support a single marginal"
                )
            value = 2.0 * marginals[0][1]
            return SensitivityResult(value, Exactness.EXACT, Method.SPECIALIZED)
        seen: set[int] = set()
        for attrs, _ in marginals:
            if seen & set(attrs):
                raise ShapeNotRecognizedError("marginals share attributes")
            seen |= set(attrs)
        value = 2.0 * max(size for _, size in marginals)
        return SensitivityResult(value, Exactness.EXACT, Method.SPECIALIZED)

    if g.kind is GraphKind.DISTANCE:
        if g.theta <= 0:
            raise ShapeNotRecognizedError("distance threshold must be positive")
        rects = [_rect_bounds(q, domain) for q in queries]
        for q in queries:
            if not q.is_rectangle():
                raise ShapeNotRecognizedError("constraint is not a rectangle")
        for i in range(len(rects)):
            for j in range(i + 1, len(rects)):
                if not _rects_disjoint(rects[i], rects[j]):
                    raise ShapeNotRecognizedError("rectangles overlap")
        adj: dict[int, set[int]] = {i: set() for i in range(len(rects))}
        for i in range(len(rects)):
            for j in range(i + 1, len(rects)):
                if _rect_distance(rects[i], rects[j]) <= g.theta:
                    adj[i].add(j)
                    adj[j].add(i)
        components: list[list[int]] = []
        unvisited = set(range(len(rects)))
        while unvisited:
            start = min(unvisited)
            comp = [start]
            unvisited.discard(start)
            stack = [start]
            while stack:
                u = stack.pop()
                for v in adj[u]:
                    if v in unvisited:
                        unvisited.discard(v)
                        comp.append(v)
                        stack.append(v)
            components.append(comp)
        maxcomp = max(len(c) for c in components)
        value = 2.0 * (maxcomp + 1)
        exact = not any(q.is_point_query(domain) for q in queries)
        if exact:
            # the bound is attained along a path through a largest component,
            # which requires the component to be traceable
            for comp in components:
                if len(comp) == maxcomp:
                    if len(comp) > MAX_POLICY_GRAPH_VERTICES or not _has_hamiltonian_path(comp, adj):
                        exact = False
                        break
        tag = Exactness.EXACT if exact else Exactness.UPPER_BOUND
        return SensitivityResult(value, tag, Method.SPECIALIZED)

    raise ShapeNotRecognizedError(f"no specialization for {g.kind.value} secrets")


# -- brute-force oracle ---------------------------------------------------------


def _query_is_id_symmetric(query: QueryKind) -> bool:
    if isinstance(query, LinearSumQuery):
        return len(set(query.weights)) <= 1
    return True


def _delta_eval(query: QueryKind, domain: DomainSpec, d1, d2) -> float:
    """L1 difference of the query between two databases, from changed tuples."""
    diffs = [(i, a, b) for i, (a, b) in enumerate(zip(d1, d2)) if a != b]
    if isinstance(query, (HistogramQuery, ClusterSizeQuery)):
        if isinstance(query, ClusterSizeQuery) and query.k == 1:
            return 0.0
        # worst case over cluster assignments separates the gained values
        # from the lost ones, which recovers the histogram L1 difference
        acc: dict[int, int] = {}
        for _, a, b in diffs:
            acc[a] = acc.get(a, 0) - 1
            acc[b] = acc.get(b, 0) + 1
        return float(sum(abs(v) for v in acc.values()))
    if isinstance(query, PartitionHistogramQuery):
        acc2: dict[int, int] = {}
        for _, a, b in diffs:
            acc2[query.cells[a]] = acc2.get(query.cells[a], 0) - 1
            acc2[query.cells[b]] = acc2.get(query.cells[b], 0) + 1
        return float(sum(abs(v) for v in acc2.values()))
    if isinstance(query, CumulativeQuery):
        shift = [0] * domain.size
        for _, a, b in diffs:
            lo, hi = min(a, b), max(a, b)
            sign = 1 if b < a else -1
            for p in range(lo, hi):
                shift[p] += sign
        return float(sum(abs(v) for v in shift))
    if isinstance(query, LinearSumQuery):
        step = query.value_step(domain)
        total = 0.0
        for i, a, b in diffs:
            total += query.weights[i] * step * (b - a)
        return abs(total)
    if isinstance(query, ClusterSumQuery):
        if query.k == 1:
            dims = domain.n_attributes
            net = [0] * dims
            for _, a, b in diffs:
                x, y = domain.unrank(a), domain.unrank(b)
                for j in range(dims):
                    net[j] += y[j] - x[j]
            return float(sum(abs(v) for v in net))
        return float(
            sum(2 * l1_distance(domain.unrank(a), domain.unrank(b)) for _, a, b in diffs)
        )
    raise TypeError(f"unknown query kind {type(query).__name__}")


def brute_force_sensitivity(
    query: QueryKind,
    policy: Policy,
    n: int,
    budget: int = DEFAULT_ENUM_BUDGET,
) -> SensitivityResult:
    """Exact sensitivity by enumerating all neighbor pairs at size n.

    For id-symmetric queries and count constraints the outer database can be
    restricted to sorted representatives: relabeling ids maps neighbors to
    neighbors and leaves the query difference unchanged.
    """
    d1_filter = None
    if _query_is_id_symmetric(query):
        d1_filter = lambda db: tuple(sorted(db)) == db
    best = 0.0
    for d1, neighbors in neighbor_databases(policy, n, budget, d1_filter):
        for d2 in neighbors:
            best = max(best, _delta_eval(query, policy.domain, d1, d2))
    return SensitivityResult(value=best, exactness=Exactness.EXACT, method=Method.BRUTE_FORCE)


def policy_sensitivity(
    query: QueryKind,
    policy: Policy,
    budget: int = DEFAULT_EDGE_BUDGET,
) -> SensitivityResult:
    """Default dispatch: closed forms when unconstrained, else the sparse
    engine (histogram query only)."""
    if policy.constraints.unconstrained:
        return closed_form_sensitivity(query, policy)
    if not isinstance(query, HistogramQuery):
        raise ValueError(
            "constrained sensitivity is only supported for the complete histogram"
        )
    if not is_sparse(policy.constraints, policy.graph, budget):
        raise NonSparseConstraintsError(
            "constraints are not sparse; use brute_force_sensitivity at tiny scale"
        )
    return sparse_constraint_sensitivity(policy, budget)
