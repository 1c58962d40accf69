"""Lloyd k-means and its privacy-preserving variant.

The private variant releases, per iteration, noisy cluster sizes (sensitivity
2, like any histogram) and noisy per-cluster coordinate sums, whose
sensitivity depends on the policy: twice the domain's L1 diameter under
full-domain secrets, but only twice the threshold under distance-threshold
secrets.  Each iteration spends an equal slice of the budget, split between
the two queries; the charges are recorded in a budget ledger that composes
sequentially to the configured epsilon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import Dataset
from .errors import InfiniteSensitivityError
from .mechanisms import BudgetLedger, PrivacyParams, compose_budgets, sample_laplace
from .policy import Policy
from .sensitivity import ClusterSumQuery, closed_form_sensitivity


@dataclass(frozen=True)
class KmeansConfig:
    k: int
    iterations: int = 10
    split: float = 0.5  # budget fraction for the size query
    init: tuple[tuple[float, ...], ...] | None = None  # None: seeded uniform in bounds

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 < self.split < 1:
            raise ValueError("split must be in (0, 1)")
        if self.init is not None and len(self.init) != self.k:
            raise ValueError("explicit init must provide k centroids")


@dataclass(frozen=True)
class ClusteringPolicy:
    """Secret specification over a continuous box domain.

    ``kind`` is one of full / distance / attribute; ``theta`` applies to the
    distance kind and is in data units.
    """

    bounds: tuple[tuple[float, float], ...]
    kind: str = "full"
    theta: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("full", "distance", "attribute"):
            raise ValueError(f"unknown clustering policy kind {self.kind!r}")
        for lo, hi in self.bounds:
            if not lo <= hi:
                raise ValueError("bounds must satisfy lo <= hi")
        if self.kind == "distance" and self.theta < 0:
            raise ValueError("theta must be non-negative")

    def diameter(self) -> float:
        return sum(hi - lo for lo, hi in self.bounds)

    def qsum_sensitivity(self, k: int) -> float:
        if self.kind == "full":
            reach = self.diameter()
        elif self.kind == "distance":
            reach = min(self.theta, self.diameter())
        else:
            reach = max(hi - lo for lo, hi in self.bounds)
        return reach if k == 1 else 2.0 * reach

    def describe(self) -> str:
        if self.kind == "distance":
            return f"distance(theta={self.theta})"
        return self.kind


@dataclass(frozen=True)
class ClusteringResult:
    centroids: np.ndarray
    objective: float
    trace: tuple[float, ...]
    ledger: BudgetLedger | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        out = {
            "centroids": [[float(v) for v in c] for c in self.centroids],
            "objective": self.objective,
            "trace": list(self.trace),
        }
        if self.ledger is not None:
            out["epsilon_spent"] = compose_budgets(self.ledger)
        return out


def dataset_to_vectors(data: Dataset) -> np.ndarray:
    """Map a discrete dataset to real vectors via per-attribute value indices."""
    return np.array([list(p) for _, p in data.rows], dtype=float)


def kmeans_objective(points, centroids) -> float:
    """Sum of squared L2 distances to the nearest centroid (ties to the
    lowest centroid index)."""
    pts = np.asarray(points, dtype=float)
    cents = np.asarray(centroids, dtype=float)
    if pts.size == 0:
        raise ValueError("no data points")
    if pts.shape[1] != cents.shape[1]:
        raise ValueError("points and centroids have different dimensions")
    d2 = ((pts[:, None, :] - cents[None, :, :]) ** 2).sum(axis=2)
    return float(d2.min(axis=1).sum())


def _assign(pts: np.ndarray, cents: np.ndarray) -> np.ndarray:
    d2 = ((pts[:, None, :] - cents[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)


def _init_centroids(cfg: KmeansConfig, bounds, seed: int, n: int) -> np.ndarray:
    if cfg.init is not None:
        return np.array(cfg.init, dtype=float)
    if n < cfg.k:
        raise ValueError(f"need at least k={cfg.k} points for random initialization")
    lows = np.array([lo for lo, _ in bounds])
    highs = np.array([hi for _, hi in bounds])
    rng = np.random.Generator(np.random.Philox(seed).jumped(1))
    return lows + rng.random((cfg.k, len(bounds))) * (highs - lows)


def _data_bounds(pts: np.ndarray) -> tuple[tuple[float, float], ...]:
    return tuple((float(lo), float(hi)) for lo, hi in zip(pts.min(axis=0), pts.max(axis=0)))


def kmeans_nonprivate(points, cfg: KmeansConfig, seed: int, bounds=None) -> ClusteringResult:
    """Plain Lloyd iteration for a fixed number of rounds.

    Empty clusters keep their previous centroid.  ``bounds`` feeds the seeded
    uniform initialization; by default the data bounding box is used.
    """
    pts = np.asarray(points, dtype=float)
    if bounds is None:
        bounds = _data_bounds(pts)
    cents = _init_centroids(cfg, bounds, seed, len(pts))
    trace = []
    for _ in range(cfg.iterations):
        assign = _assign(pts, cents)
        new = cents.copy()
        for c in range(cfg.k):
            members = pts[assign == c]
            if len(members):
                new[c] = members.mean(axis=0)
        cents = new
        trace.append(kmeans_objective(pts, cents))
    return ClusteringResult(centroids=cents, objective=trace[-1], trace=tuple(trace))


def _resolve_policy(policy, cfg: KmeansConfig) -> tuple[ClusteringPolicy, float]:
    if isinstance(policy, ClusteringPolicy):
        return policy, policy.qsum_sensitivity(cfg.k)
    if isinstance(policy, Policy):
        if not policy.constraints.unconstrained:
            raise ValueError("private k-means requires an unconstrained policy")
        bounds = tuple((0.0, float(a.size - 1)) for a in policy.domain.attributes)
        sens = closed_form_sensitivity(ClusterSumQuery(cfg.k), policy).value
        return ClusteringPolicy(bounds=bounds), sens
    raise TypeError("policy must be a ClusteringPolicy or an unconstrained Policy")


def kmeans_private(
    points,
    cfg: KmeansConfig,
    policy,
    pp: PrivacyParams,
    zero_noise: bool = False,
) -> ClusteringResult:
    """Private Lloyd iteration: noisy sizes and sums per round.

    Per iteration, epsilon/iterations is split between the size query
    (sensitivity 2) and the sum query (policy-specific sensitivity).  Noisy
    centroids are noisy_sum / max(noisy_size, 1), clamped to the policy
    bounds.  Initialization is data-independent: seeded uniform points in
    the bounds box (or the explicit centroids from the config).
    """
    pts = np.asarray(points, dtype=float)
    cpolicy, qsum_sens = _resolve_policy(policy, cfg)
    if not math.isfinite(qsum_sens):
        raise InfiniteSensitivityError("sum query has infinite sensitivity under this policy")
    if pts.shape[1] != len(cpolicy.bounds):
        raise ValueError("data dimension does not match policy bounds")
    lows = np.array([lo for lo, _ in cpolicy.bounds])
    highs = np.array([hi for _, hi in cpolicy.bounds])
    cents = _init_centroids(cfg, cpolicy.bounds, pp.seed, len(pts))

    eps_iter = pp.epsilon / cfg.iterations
    eps_size = eps_iter * cfg.split
    eps_sum = eps_iter - eps_size
    size_scale = 2.0 / eps_size
    sum_scale = qsum_sens / eps_sum
    ledger = BudgetLedger()
    trace = []
    dims = pts.shape[1]
    for t in range(cfg.iterations):
        assign = _assign(pts, cents)
        size_rng = np.random.Generator(np.random.Philox(pp.seed).jumped(2 + 2 * t))
        sum_rng = np.random.Generator(np.random.Philox(pp.seed).jumped(3 + 2 * t))
        new = np.empty_like(cents)
        for c in range(cfg.k):
            members = pts[assign == c]
            size = float(len(members))
            total = members.sum(axis=0) if len(members) else np.zeros(dims)
            if not zero_noise:
                size += sample_laplace(size_scale, size_rng)
                total = total + np.array(
                    [sample_laplace(sum_scale, sum_rng) for _ in range(dims)]
                )
            new[c] = total / max(size, 1.0)
        cents = np.clip(new, lows, highs)
        ledger.charge(f"iteration {t}: sizes", eps_size)
        ledger.charge(f"iteration {t}: sums", eps_sum)
        trace.append(kmeans_objective(pts, cents))
    return ClusteringResult(
        centroids=cents, objective=trace[-1], trace=tuple(trace), ledger=ledger
    )
