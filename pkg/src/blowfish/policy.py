"""Privacy policies: secret graphs, deterministic count constraints, and the
constrained neighbor relation.

A policy bundles a domain, a discriminative secret graph over that domain,
and a set of count-query constraints.  The secret graph's edges are the value
pairs an adversary must not be able to tell apart for any individual.  The
constraints restrict which databases are considered possible; neighbors are
constraint-satisfying database pairs that are minimally different, first in
the set of realized secret pairs and then in raw tuple changes.

Neighbor enumeration is exact and therefore confined to tiny instances by an
explicit budget; it is the ground truth the sensitivity engines are checked
against.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import deque
from dataclasses import dataclass
from enum import Enum

from .domain import DomainSpec, Point, l1_distance
from .errors import BudgetExceededError, InfeasibleConstraintsError

DEFAULT_ENUM_BUDGET = 100_000
DEFAULT_EDGE_BUDGET = 20_000_000


class GraphKind(str, Enum):
    FULL = "full"
    ATTRIBUTE = "attribute"
    PARTITION = "partition"
    DISTANCE = "distance"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class SecretGraph:
    """Implicit edge predicate over the points of a domain.

    The edge set is symmetric and irreflexive.  PARTITION carries a cell id
    per rank; DISTANCE uses the L1 metric over value indices with threshold
    ``theta``; EXPLICIT stores unordered rank pairs.
    """

    domain: DomainSpec
    kind: GraphKind
    theta: int = 0
    cells: tuple[int, ...] | None = None
    edge_list: frozenset[tuple[int, int]] | None = None

    def __post_init__(self) -> None:
        if self.kind is GraphKind.DISTANCE and self.theta < 0:
            raise ValueError("theta must be non-negative")
        if self.kind is GraphKind.PARTITION:
            if self.cells is None or len(self.cells) != self.domain.size:
                raise ValueError("partition graph needs one cell id per domain rank")
        if self.kind is GraphKind.EXPLICIT:
            if self.edge_list is None:
                raise ValueError("explicit graph needs an edge set")
            for a, b in self.edge_list:
                if not (0 <= a < self.domain.size and 0 <= b < self.domain.size):
                    raise ValueError(f"edge ({a},{b}) references an invalid rank")
                if a == b:
                    raise ValueError("self-loops are not allowed")

    # -- constructors --------------------------------------------------

    @classmethod
    def full(cls, domain: DomainSpec) -> "SecretGraph":
        return cls(domain, GraphKind.FULL)

    @classmethod
    def attribute(cls, domain: DomainSpec) -> "SecretGraph":
        return cls(domain, GraphKind.ATTRIBUTE)

    @classmethod
    def partition(cls, domain: DomainSpec, groups) -> "SecretGraph":
        """Build from rank groups, e.g. ``[[0, 1], [2, 3]]``."""
        cells = [-1] * domain.size
        for cid, group in enumerate(groups):
            for r in group:
                if not 0 <= r < domain.size:
                    raise ValueError(f"rank {r} out of range")
                if cells[r] != -1:
                    raise ValueError(f"rank {r} assigned to two cells")
                cells[r] = cid
        if any(c == -1 for c in cells):
            raise ValueError("partition must cover every domain point")
        return cls(domain, GraphKind.PARTITION, cells=tuple(cells))

    @classmethod
    def distance(cls, domain: DomainSpec, theta: int) -> "SecretGraph":
        return cls(domain, GraphKind.DISTANCE, theta=int(theta))

    @classmethod
    def explicit(cls, domain: DomainSpec, edges) -> "SecretGraph":
        normalized = frozenset((min(a, b), max(a, b)) for a, b in edges)
        return cls(domain, GraphKind.EXPLICIT, edge_list=normalized)

    # -- predicates ----------------------------------------------------

    def has_any_edge(self) -> bool:
        if self.kind is GraphKind.FULL:
            return self.domain.size >= 2
        if self.kind is GraphKind.ATTRIBUTE:
            return any(a.size >= 2 for a in self.domain.attributes)
        if self.kind is GraphKind.PARTITION:
            counts: dict[int, int] = {}
            for c in self.cells:
                counts[c] = counts.get(c, 0) + 1
            return any(v >= 2 for v in counts.values())
        if self.kind is GraphKind.DISTANCE:
            return self.theta >= 1 and self.domain.size >= 2
        return bool(self.edge_list)

    def edge_matrix(self):
        """Dense boolean rank-by-rank adjacency (tiny domains only)."""
        import numpy as np

        size = self.domain.size
        if size * size > DEFAULT_EDGE_BUDGET:
            raise BudgetExceededError(f"edge matrix over {size} ranks exceeds budget")
        mat = np.zeros((size, size), dtype=bool)
        for x_rank, y_rank in iter_graph_edges(self):
            mat[x_rank, y_rank] = True
        return mat


def is_edge(g: SecretGraph, x: Point, y: Point) -> bool:
    """Whether (x, y) is a discriminative secret pair.  False for x == y."""
    if x == y:
        return False
    g.domain.validate_point(x)
    g.domain.validate_point(y)
    if g.kind is GraphKind.FULL:
        return True
    if g.kind is GraphKind.ATTRIBUTE:
        return sum(1 for a, b in zip(x, y) if a != b) == 1
    if g.kind is GraphKind.PARTITION:
        return g.cells[g.domain.rank(x)] == g.cells[g.domain.rank(y)]
    if g.kind is GraphKind.DISTANCE:
        return l1_distance(x, y) <= g.theta
    rx, ry = g.domain.rank(x), g.domain.rank(y)
    return (min(rx, ry), max(rx, ry)) in g.edge_list


def graph_distance(g: SecretGraph, x: Point, y: Point) -> float:
    """Shortest-path edge count between x and y; 0 iff x == y, inf if disconnected.

    Closed forms cover the implicit graph kinds; explicit graphs fall back
    to breadth-first search over ranks.
    """
    if x == y:
        g.domain.validate_point(x)
        return 0
    if g.kind is GraphKind.FULL:
        return 1
    if g.kind is GraphKind.ATTRIBUTE:
        return sum(1 for a, b in zip(x, y) if a != b)
    if g.kind is GraphKind.PARTITION:
        return 1 if is_edge(g, x, y) else math.inf
    if g.kind is GraphKind.DISTANCE:
        if g.theta < 1:
            return math.inf
        # coordinates move independently, so theta L1 steps per hop are free
        return math.ceil(l1_distance(x, y) / g.theta)
    return _bfs_distance(g, g.domain.rank(x), g.domain.rank(y))


def _bfs_distance(g: SecretGraph, src: int, dst: int) -> float:
    adj: dict[int, list[int]] = {}
    for a, b in g.edge_list:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    seen = {src: 0}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        if u == dst:
            return seen[u]
        for v in adj.get(u, ()):
            if v not in seen:
                seen[v] = seen[u] + 1
                queue.append(v)
    return math.inf


def iter_graph_edges(g: SecretGraph, budget: int = DEFAULT_EDGE_BUDGET):
    """Yield ordered rank pairs (x, y), x != y, that are edges of g.

    Both directions of every edge are produced.  Raises BudgetExceededError
    if the enumeration would visit more than ``budget`` candidate pairs.
    """
    domain = g.domain
    size = domain.size
    if g.kind in (GraphKind.FULL, GraphKind.DISTANCE) and domain.n_attributes > 1:
        candidates = size * size
    elif g.kind is GraphKind.FULL:
        candidates = size * size
    elif g.kind is GraphKind.ATTRIBUTE:
        candidates = size * sum(a.size for a in domain.attributes)
    elif g.kind is GraphKind.PARTITION:
        counts: dict[int, int] = {}
        for c in g.cells:
            counts[c] = counts.get(c, 0) + 1
        candidates = sum(v * v for v in counts.values())
    elif g.kind is GraphKind.DISTANCE:
        candidates = size * min(size, 2 * g.theta + 1)
    else:
        candidates = 2 * len(g.edge_list)
    if candidates > budget:
        raise BudgetExceededError(
            f"edge iteration would visit ~{candidates} pairs, budget is {budget}"
        )

    if g.kind is GraphKind.FULL:
        for x in range(size):
            for y in range(size):
                if x != y:
                    yield x, y
    elif g.kind is GraphKind.ATTRIBUTE:
        for x in range(size):
            point = domain.unrank(x)
            for i, attr in enumerate(domain.attributes):
                for v in range(attr.size):
                    if v != point[i]:
                        y = x + (v - point[i]) * domain._weights[i]
                        yield x, y
    elif g.kind is GraphKind.PARTITION:
        groups: dict[int, list[int]] = {}
        for r, c in enumerate(g.cells):
            groups.setdefault(c, []).append(r)
        for group in groups.values():
            for x in group:
                for y in group:
                    if x != y:
                        yield x, y
    elif g.kind is GraphKind.DISTANCE:
        if g.theta >= 1:
            if domain.n_attributes == 1:
                for x in range(size):
                    for y in range(max(0, x - g.theta), min(size, x + g.theta + 1)):
                        if y != x:
                            yield x, y
            else:
                points = [domain.unrank(r) for r in range(size)]
                for x in range(size):
                    for y in range(size):
                        if x != y and l1_distance(points[x], points[y]) <= g.theta:
                            yield x, y
    else:
        for a, b in g.edge_list:
            yield a, b
            yield b, a


# -- constraints -----------------------------------------------------------


@dataclass(frozen=True)
class CountQuery:
    """Conjunctive count query: per-attribute allowed value-index sets.

    Attributes without an entry are unconstrained.  Marginal cells are the
    singleton-set special case; rectangles the contiguous-set special case.
    ``answer`` records the publicly known count, if any.
    """

    allowed: tuple[frozenset[int] | None, ...]
    answer: int | None = None

    def __post_init__(self) -> None:
        for s in self.allowed:
            if s is not None and not s:
                raise ValueError("allowed value sets must be non-empty")

    @classmethod
    def from_labels(cls, domain: DomainSpec, where: dict[str, list[str]], answer: int | None = None) -> "CountQuery":
        allowed: list[frozenset[int] | None] = []
        unknown = set(where) - {a.name for a in domain.attributes}
        if unknown:
            raise ValueError(f"unknown attributes in query: {sorted(unknown)}")
        for attr in domain.attributes:
            if attr.name in where:
                allowed.append(frozenset(attr.index_of(v) for v in where[attr.name]))
            else:
                allowed.append(None)
        return cls(tuple(allowed), answer)

    @classmethod
    def rectangle(cls, domain: DomainSpec, bounds: dict[str, tuple[int, int]], answer: int | None = None) -> "CountQuery":
        allowed: list[frozenset[int] | None] = []
        for attr in domain.attributes:
            if attr.name in bounds:
                lo, hi = bounds[attr.name]
                if not (0 <= lo <= hi < attr.size):
                    raise ValueError(f"bad range [{lo},{hi}] for attribute {attr.name!r}")
                allowed.append(frozenset(range(lo, hi + 1)))
            else:
                allowed.append(None)
        return cls(tuple(allowed), answer)

    def matches(self, point: Point) -> bool:
        return all(s is None or v in s for v, s in zip(point, self.allowed))

    def support_size(self, domain: DomainSpec) -> int:
        out = 1
        for s, attr in zip(self.allowed, domain.attributes):
            out *= attr.size if s is None else len(s)
        return out

    def is_point_query(self, domain: DomainSpec) -> bool:
        return self.support_size(domain) == 1

    def is_rectangle(self) -> bool:
        for s in self.allowed:
            if s is None:
                continue
            vals = sorted(s)
            if vals[-1] - vals[0] + 1 != len(vals):
                return False
        return True

    def with_answer(self, answer: int) -> "CountQuery":
        return CountQuery(self.allowed, answer)


class ConstraintKind(str, Enum):
    NONE = "none"
    CARDINALITY = "cardinality"
    GENERAL = "general"


@dataclass(frozen=True)
class ConstraintSet:
    kind: ConstraintKind
    queries: tuple[CountQuery, ...] = ()

    def __post_init__(self) -> None:
        if self.kind is not ConstraintKind.GENERAL and self.queries:
            raise ValueError("only general constraint sets carry queries")

    @classmethod
    def none(cls) -> "ConstraintSet":
        return cls(ConstraintKind.NONE)

    @classmethod
    def cardinality_only(cls) -> "ConstraintSet":
        return cls(ConstraintKind.CARDINALITY)

    @classmethod
    def of(cls, queries) -> "ConstraintSet":
        return cls(ConstraintKind.GENERAL, tuple(queries))

    @property
    def unconstrained(self) -> bool:
        return self.kind is not ConstraintKind.GENERAL


@dataclass(frozen=True)
class Policy:
    """The policy triple: domain, secret graph, constraint set."""

    domain: DomainSpec
    graph: SecretGraph
    constraints: ConstraintSet

    def __post_init__(self) -> None:
        if self.graph.domain != self.domain:
            raise ValueError("secret graph is defined over a different domain")

    def describe(self) -> str:
        g = self.graph
        if g.kind is GraphKind.DISTANCE:
            gdesc = f"distance(theta={g.theta})"
        elif g.kind is GraphKind.PARTITION:
            gdesc = f"partition(cells={len(set(g.cells))})"
        elif g.kind is GraphKind.EXPLICIT:
            gdesc = f"explicit(edges={len(g.edge_list)})"
        else:
            gdesc = g.kind.value
        c = self.constraints
        cdesc = c.kind.value if c.unconstrained else f"general(q={len(c.queries)})"
        return f"{gdesc}|{cdesc}"


def load_policy(source: str | dict, domain: DomainSpec) -> Policy:
    """Parse a policy file: ``{"graph": {...}, "constraints": {...}}``."""
    if isinstance(source, str):
        try:
            source = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed policy file: {exc}") from exc
    if not isinstance(source, dict) or "graph" not in source:
        raise ValueError("policy file needs a 'graph' object")
    gspec = source["graph"]
    kind = str(gspec.get("kind", "")).lower()
    if kind == "full":
        graph = SecretGraph.full(domain)
    elif kind == "attribute":
        graph = SecretGraph.attribute(domain)
    elif kind == "distance":
        if "theta" not in gspec:
            raise ValueError("distance graph needs 'theta'")
        graph = SecretGraph.distance(domain, int(gspec["theta"]))
    elif kind == "partition":
        if "cells" not in gspec:
            raise ValueError("partition graph needs 'cells' (lists of ranks)")
        graph = SecretGraph.partition(domain, gspec["cells"])
    elif kind == "explicit":
        if "edges" not in gspec:
            raise ValueError("explicit graph needs 'edges'")
        graph = SecretGraph.explicit(domain, [tuple(e) for e in gspec["edges"]])
    else:
        raise ValueError(f"unknown graph kind {gspec.get('kind')!r}")

    cspec = source.get("constraints", {"kind": "none"})
    if isinstance(cspec, list):
        cspec = {"kind": "general", "queries": cspec}
    ckind = str(cspec.get("kind", "general")).lower()
    if ckind == "none":
        constraints = ConstraintSet.none()
    elif ckind == "cardinality":
        constraints = ConstraintSet.cardinality_only()
    elif ckind == "general":
        queries = []
        for q in cspec.get("queries", ()):
            where_raw = q.get("where", {})
            labels: dict[str, list[str]] = {}
            ranges: dict[str, tuple[int, int]] = {}
            for attr, sel in where_raw.items():
                if isinstance(sel, dict) and "range" in sel:
                    lo, hi = sel["range"]
                    ranges[attr] = (int(lo), int(hi))
                else:
                    labels[attr] = list(sel)
            if ranges and labels:
                raise ValueError("mix of label and range selections in one query")
            answer = q.get("answer")
            answer = None if answer is None else int(answer)
            if ranges:
                queries.append(CountQuery.rectangle(domain, ranges, answer))
            else:
                queries.append(CountQuery.from_labels(domain, labels, answer))
        constraints = ConstraintSet.of(queries)
    else:
        raise ValueError(f"unknown constraint kind {cspec.get('kind')!r}")
    return Policy(domain=domain, graph=graph, constraints=constraints)


# -- neighbor enumeration ----------------------------------------------------


@dataclass(frozen=True)
class NeighborPair:
    """An ordered neighbor pair of databases, stored as per-id value ranks.

    ``t_set`` holds the realized discriminative secret pairs as
    (id, x_rank, y_rank) triples; ``delta`` is the size of the symmetric
    difference of the two databases as sets of (id, value) tuples.
    """

    d1: tuple[int, ...]
    d2: tuple[int, ...]
    t_set: frozenset[tuple[int, int, int]]
    delta: int


def database_satisfies(constraints: ConstraintSet, db_ranks, domain: DomainSpec) -> bool:
    """Whether a database meets every recorded constraint answer.

    Queries without recorded answers do not restrict the database set.
    """
    if constraints.unconstrained:
        return True
    points = [domain.unrank(r) for r in db_ranks]
    for q in constraints.queries:
        if q.answer is None:
            continue
        if sum(1 for p in points if q.matches(p)) != q.answer:
            return False
    return True


def enumerate_databases(policy: Policy, n: int, budget: int = DEFAULT_ENUM_BUDGET) -> list[tuple[int, ...]]:
    """All databases of n tuples (as rank vectors) satisfying the constraints."""
    size = policy.domain.size
    total = size**n
    if total > budget:
        raise BudgetExceededError(f"{total} databases exceed enumeration budget {budget}")
    match = _query_match_vectors(policy)
    out = []
    for db in itertools.product(range(size), repeat=n):
        if _fast_satisfies(match, db, n):
            out.append(db)
    if not out:
        raise InfeasibleConstraintsError("constraint answers admit no database")
    return out


def _query_match_vectors(policy: Policy) -> list[tuple[list[bool], int]]:
    """Per answered query: rank->match vector plus the recorded answer."""
    if policy.constraints.unconstrained:
        return []
    out = []
    for q in policy.constraints.queries:
        if q.answer is None:
            continue
        vec = [q.matches(policy.domain.unrank(r)) for r in range(policy.domain.size)]
        out.append((vec, q.answer))
    return out


def _fast_satisfies(match, db, n: int) -> bool:
    for vec, answer in match:
        c = 0
        for r in db:
            if vec[r]:
                c += 1
        if c != answer:
            return False
    return True


def _mask_candidates(dbs, d1, n, size, edge):
    """(t_mask, delta_mask, db) for every database differing from d1.

    Masks are ints with bit (i*size + value) set per changed tuple; the t
    mask keeps only changes along secret-graph edges.
    """
    out = []
    for db in dbs:
        t = 0
        d = 0
        for i in range(n):
            v1 = d1[i]
            v2 = db[i]
            if v1 != v2:
                b = 1 << (i * size + v2)
                d |= b
                if edge[v1][v2]:
                    t |= b
        if d:
            out.append((t, d, db))
    return out


def _neighbors_of(cands):
    """Filter mask candidates down to the minimally-different ones.

    Only databases whose every difference realizes a discriminative pair are
    comparable (t mask == delta mask): changes the policy does not protect
    cannot create or break neighbor pairs.  A candidate is then discarded
    when some comparable database realizes a non-empty proper subset of its
    secret pairs, or the same secret pairs with strictly fewer raw changes.
    Candidates are scanned in (|t|, |delta|) order so the running antichain
    of survivors is a complete set of potential dominators.
    """
    cands = [c for c in cands if c[0] != 0 and c[0] == c[1]]
    cands.sort(key=lambda c: (c[0].bit_count(), c[1].bit_count()))
    antichain: list[tuple[int, int]] = []
    survivors = []
    for t2, d2, db2 in cands:
        dominated = False
        for t3, d3 in antichain:
            if t3 & ~t2 == 0:
                if t3 != t2:
                    dominated = True
                    break
                if d3 & ~d2 == 0 and d3 != d2:
                    dominated = True
                    break
        if not dominated:
            antichain.append((t2, d2))
            survivors.append((t2, d2, db2))
    return survivors


def enumerate_neighbors(policy: Policy, n: int, budget: int = DEFAULT_ENUM_BUDGET) -> list[NeighborPair]:
    """All ordered neighbor pairs under the policy, at tiny scale.

    A neighbor pair satisfies every recorded constraint answer on both
    sides, differs only along secret-graph edges (each difference is a
    realized discriminative pair), and is minimal: no constraint-satisfying
    database realizes a non-empty proper subset of its secret pairs, nor the
    same pairs with a strictly smaller symmetric difference.  With no
    constraints this is exactly the set of pairs differing in one tuple
    along a secret-graph edge.
    """
    domain = policy.domain
    size = domain.size
    dbs = enumerate_databases(policy, n, budget)
    edge = [row.tolist() for row in policy.graph.edge_matrix()]
    pairs: list[NeighborPair] = []
    for d1 in dbs:
        cands = _mask_candidates(dbs, d1, n, size, edge)
        for _, _, d2 in _neighbors_of(cands):
            t_set = frozenset(
                (i, d1[i], d2[i])
                for i in range(n)
                if d1[i] != d2[i] and edge[d1[i]][d2[i]]
            )
            delta = 2 * sum(1 for i in range(n) if d1[i] != d2[i])
            pairs.append(NeighborPair(d1=d1, d2=d2, t_set=t_set, delta=delta))
    return pairs


def neighbor_databases(policy: Policy, n: int, budget: int = DEFAULT_ENUM_BUDGET, d1_filter=None):
    """Yield (d1, [d2 databases that are neighbors of d1]) lazily per d1.

    Shares the enumeration with enumerate_neighbors but lets callers restrict
    the d1 side (e.g. to canonical representatives under id permutation).
    """
    domain = policy.domain
    size = domain.size
    dbs = enumerate_databases(policy, n, budget)
    edge = [row.tolist() for row in policy.graph.edge_matrix()]
    for d1 in dbs:
        if d1_filter is not None and not d1_filter(d1):
            continue
        cands = _mask_candidates(dbs, d1, n, size, edge)
        yield d1, [db2 for _, _, db2 in _neighbors_of(cands)]


# -- parallel decomposition --------------------------------------------------


def _critical_value_pairs(policy: Policy, q: CountQuery, n: int, budget: int) -> set[tuple[int, int]]:
    """Edge value pairs (x, y) critical to q: changing some tuple from x to y
    can flip q's satisfaction while a witness database satisfying q exists.

    For a count query with recorded answer this is decidable by a counting
    argument: the pair must lift or lower q, and the remaining n-1 tuples
    must be able to meet the answer.
    """
    if q.answer is None:
        return set()
    domain = policy.domain
    supp = q.support_size(domain)
    cosupp = domain.size - supp
    out = set()
    for x_rank, y_rank in iter_graph_edges(policy.graph, budget):
        x, y = domain.unrank(x_rank), domain.unrank(y_rank)
        mx, my = q.matches(x), q.matches(y)
        if mx == my:
            continue
        need = q.answer - (1 if mx else 0)
        if not 0 <= need <= n - 1:
            continue
        if need > 0 and supp == 0:
            continue
        if (n - 1 - need) > 0 and cosupp == 0:
            continue
        out.add((x_rank, y_rank))
    return out


def check_parallel_decomposition(
    policy: Policy,
    subsets,
    n: int | None = None,
    budget: int = DEFAULT_EDGE_BUDGET,
) -> bool:
    """Whether the constraints decompose over the given disjoint id subsets.

    True when the constraint set can be split into disjoint groups, one per
    subset, such that no constraint's critical secret pairs touch ids outside
    its own subset.  Cardinality-only and empty constraint sets always pass.
    """
    subsets = [frozenset(s) for s in subsets]
    for i, a in enumerate(subsets):
        for b in subsets[i + 1 :]:
            if a & b:
                raise ValueError("id subsets must be disjoint")
    if policy.constraints.unconstrained:
        return True
    if n is None:
        n = max((max(s) for s in subsets if s), default=-1) + 1
    nonempty = sum(1 for s in subsets if s)
    for q in policy.constraints.queries:
        if q.answer is None:
            continue
        crit = _critical_value_pairs(policy, q, n, budget)
        # secrets are uniform across ids, so a critical pair exists for every
        # id at once; such a query conflicts with every other non-empty subset
        if crit and nonempty > 1:
            return False
    return True
