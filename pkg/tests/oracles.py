"""Independent reference implementations used to cross-check the library.

Everything here is deliberately written with different data structures and
algorithms than the package (sets instead of bitmasks, recursion instead of
subset DP, explicit enumeration instead of closed forms) so agreement is
meaningful.
"""

from __future__ import annotations

import itertools
from collections import deque

import numpy as np

from blowfish import Policy, is_edge
from blowfish.sensitivity import PolicyGraph


def isotonic_by_enumeration(y) -> np.ndarray:
    """Exhaustive minimization over monotone block-mean candidates.

    The L2-nearest non-decreasing vector is piecewise constant with block
    means, so enumerating every split of the sequence into consecutive
    blocks and keeping the cheapest monotone one finds the exact optimum.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    best_cost, best_fit = None, None
    for cuts in itertools.product([0, 1], repeat=n - 1):
        edges = [0] + [i for i, c in enumerate(cuts, start=1) if c] + [n]
        means = [y[a:b].mean() for a, b in zip(edges, edges[1:])]
        if any(m2 < m1 for m1, m2 in zip(means, means[1:])):
            continue
        fit = np.concatenate(
            [np.full(b - a, m) for (a, b), m in zip(zip(edges, edges[1:]), means)]
        )
        cost = float(((fit - y) ** 2).sum())
        if best_cost is None or cost < best_cost:
            best_cost, best_fit = cost, fit
    return best_fit


def satisfying_databases(policy: Policy, n: int) -> list[tuple[int, ...]]:
    domain = policy.domain
    points = [domain.unrank(r) for r in range(domain.size)]
    answered = [q for q in policy.constraints.queries if q.answer is not None]
    out = []
    for db in itertools.product(range(domain.size), repeat=n):
        if all(sum(1 for r in db if q.matches(points[r])) == q.answer for q in answered):
            out.append(db)
    return out


def is_neighbor_by_definition(policy: Policy, d1, d2, dbs=None) -> bool:
    """Set-based re-check of the neighbor conditions.

    Both databases satisfy the constraints, every difference realizes a
    discriminative pair, the realized pair set is non-empty, and no
    comparable constraint-satisfying database realizes a strictly smaller
    non-empty pair set (or the same set with a smaller symmetric
    difference).
    """
    domain = policy.domain
    n = len(d1)
    points = [domain.unrank(r) for r in range(domain.size)]
    if dbs is None:
        dbs = satisfying_databases(policy, n)
    if tuple(d1) not in dbs or tuple(d2) not in dbs:
        return False

    def edge(a, b):
        return is_edge(policy.graph, points[a], points[b])

    def comparable(da, db):
        return all(a == b or edge(a, b) for a, b in zip(da, db))

    def tset(da, db):
        return frozenset(
            (i, da[i], db[i]) for i in range(n) if da[i] != db[i] and edge(da[i], db[i])
        )

    def delta(da, db):
        return frozenset(
            p for i in range(n) if da[i] != db[i] for p in [(i, da[i]), (i, db[i])]
        )

    if not comparable(d1, d2):
        return False
    t12 = tset(d1, d2)
    if not t12:
        return False
    for d3 in dbs:
        if not comparable(d1, d3):
            continue
        t13 = tset(d1, d3)
        if t13 and t13 < t12:
            return False
        if t13 == t12 and delta(d1, d3) < delta(d1, d2):
            return False
    return True


def neighbors_by_definition(policy: Policy, n: int) -> set[tuple[tuple[int, ...], tuple[int, ...]]]:
    dbs = satisfying_databases(policy, n)
    out = set()
    for d1 in dbs:
        for d2 in dbs:
            if d1 != d2 and is_neighbor_by_definition(policy, d1, d2, dbs):
                out.add((d1, d2))
    return out


def bfs_graph_distance(edge_matrix, src: int, dst: int) -> float:
    if src == dst:
        return 0
    seen = {src: 0}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for v in range(len(edge_matrix)):
            if edge_matrix[u][v] and v not in seen:
                seen[v] = seen[u] + 1
                if v == dst:
                    return seen[v]
                queue.append(v)
    return float("inf")


def alpha_xi_by_backtracking(pg: PolicyGraph) -> tuple[int, int]:
    """Plain recursive backtracking over simple cycles and source-sink paths."""
    adj: dict[int, list[int]] = {v: [] for v in range(pg.n_vertices)}
    for u, v in pg.edges:
        adj[u].append(v)

    best_cycle = 0

    def cycle_search(start, current, visited, length):
        nonlocal best_cycle
        for w in adj[current]:
            if w == start:
                best_cycle = max(best_cycle, length + 1)
            elif w not in visited and w > start and w < pg.n_queries:
                visited.add(w)
                cycle_search(start, w, visited, length + 1)
                visited.discard(w)

    for s in range(pg.n_queries):
        cycle_search(s, s, {s}, 0)

    best_path = 0

    def path_search(current, visited, length):
        nonlocal best_path
        for w in adj[current]:
            if w == pg.sink:
                best_path = max(best_path, length + 1)
            elif w not in visited:
                visited.add(w)
                path_search(w, visited, length + 1)
                visited.discard(w)

    path_search(pg.source, {pg.source}, 0)
    return best_cycle, best_path


def range_query_truth(counts, queries) -> np.ndarray:
    prefix = np.concatenate([[0], np.cumsum(counts)])
    return np.array([prefix[j] - prefix[i - 1] for i, j in queries], dtype=float)
