"""Noise mechanisms for histogram, cumulative-histogram and range release.

Four release strategies share the primitives here:

* the Laplace mechanism, calibrated to a policy-specific sensitivity;
* the ordered mechanism: independent noise on every prefix count followed by
  isotonic (pool-adjacent-violators) inference;
* the ordered-hierarchical mechanism: noisy prefix counts at every theta-th
  position (S nodes) plus an f-ary subtree of noisy interval counts per block
  (H nodes), with the privacy budget split between the two node kinds;
* the hierarchical baseline, an f-ary interval tree over the whole domain,
  which the ordered-hierarchical structure degenerates to at theta = |domain|.

Every noisy value is drawn from a counter-based stream keyed by (seed, node
index), so construction order and internal parallelism cannot change results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfiniteSensitivityError


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    seed: int

    def __post_init__(self) -> None:
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be positive and finite")


def _node_rng(seed: int, index: int) -> np.random.Generator:
    # Philox jumps give disjoint counter ranges per node index
    return np.random.Generator(np.random.Philox(seed).jumped(index))


def sample_laplace(scale: float, rng: np.random.Generator) -> float:
    """One zero-mean Laplace variate via inverse CDF from a single uniform."""
    if scale < 0 or not math.isfinite(scale):
        raise ValueError(f"scale must be finite and non-negative, got {scale}")
    if scale == 0:
        return 0.0
    u = rng.random() - 0.5
    mag = 1.0 - 2.0 * abs(u)
    if mag <= 0.0:
        mag = 5e-324
    return -scale * math.copysign(1.0, u) * math.log(mag)


def laplace_mechanism(truth, sensitivity: float, pp: PrivacyParams) -> np.ndarray:
    """Add iid Laplace(sensitivity / epsilon) noise to each component."""
    if not math.isfinite(sensitivity):
        raise InfiniteSensitivityError(
            "infinite sensitivity: the policy cannot release this query with finite noise"
        )
    if sensitivity < 0:
        raise ValueError("sensitivity must be non-negative")
    values = np.asarray(truth, dtype=float)
    if sensitivity == 0:
        return values.copy()
    scale = sensitivity / pp.epsilon
    rng = _node_rng(pp.seed, 0)
    noise = np.array([sample_laplace(scale, rng) for _ in range(values.size)])
    return values + noise.reshape(values.shape)


def isotonic_inference(noisy, lower_bound: float | None = None) -> np.ndarray:
    """L2-nearest non-decreasing vector (pool adjacent violators).

    With ``lower_bound`` set, the result is additionally clipped from below;
    clipping the isotonic fit is the exact projection onto the constrained
    cone.
    """
    y = np.asarray(noisy, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("input must be a non-empty 1-D vector")
    vals: list[float] = []
    weights: list[int] = []
    for v in y:
        vals.append(float(v))
        weights.append(1)
        while len(vals) >= 2 and vals[-2] > vals[-1]:
            w = weights[-2] + weights[-1]
            merged = (vals[-2] * weights[-2] + vals[-1] * weights[-1]) / w
            vals[-2:] = [merged]
            weights[-2:] = [w]
    out = np.repeat(vals, weights)
    if lower_bound is not None:
        out = np.maximum(out, lower_bound)
    return out


@dataclass(frozen=True)
class ReleasedCumulative:
    """A released cumulative histogram: raw noisy prefixes and the
    monotone post-inference vector actually published."""

    noisy: np.ndarray
    inferred: np.ndarray
    theta: int
    epsilon: float
    seed: int

    def range_query(self, i: int, j: int) -> float:
        size = self.inferred.size
        if not 1 <= i <= j <= size:
            raise ValueError(f"invalid range [{i},{j}] for domain of size {size}")
        lower = self.inferred[i - 2] if i >= 2 else 0.0
        return float(self.inferred[j - 1] - lower)

    def to_dict(self) -> dict:
        return {
            "mechanism": "ordered",
            "theta": self.theta,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "values": [float(v) for v in self.inferred],
        }


def ordered_mechanism(
    hist,
    theta: int,
    pp: PrivacyParams,
    clamp_nonnegative: bool = True,
    zero_noise: bool = False,
) -> ReleasedCumulative:
    """Release the cumulative histogram with Laplace(theta / epsilon) noise
    per prefix count, then isotonic inference.

    Under distance-threshold secrets with threshold theta, a protected change
    moves a tuple at most theta rank positions, so each prefix count moves by
    at most theta.
    """
    counts = np.asarray(hist, dtype=np.int64)
    if theta < 1:
        raise ValueError("theta must be >= 1")
    prefix = np.cumsum(counts).astype(float)
    scale = 0.0 if zero_noise else theta / pp.epsilon
    noisy = prefix.copy()
    for pos in range(1, counts.size + 1):
        noisy[pos - 1] += sample_laplace(scale, _node_rng(pp.seed, 2 * pos))
    inferred = isotonic_inference(noisy, lower_bound=0.0 if clamp_nonnegative else None)
    return ReleasedCumulative(
        noisy=noisy, inferred=inferred, theta=theta, epsilon=pp.epsilon, seed=pp.seed
    )


# -- ordered hierarchical structure -------------------------------------------


@dataclass(frozen=True)
class BudgetSplit:
    eps_s: float
    eps_h: float
    predicted_mse: float
    c1: float
    c2: float


def oh_error_model(domain_size: int, theta: int, fanout: int, eps_s: float, eps_h: float) -> float:
    """Predicted mean squared error of a random range query: c1/eps_s^2 + c2/eps_h^2."""
    c1, c2 = _error_coefficients(domain_size, theta, fanout)
    out = 0.0
    if c1:
        out += c1 / eps_s**2
    if c2:
        out += c2 / eps_h**2
    return out


def _error_coefficients(domain_size: int, theta: int, fanout: int) -> tuple[float, float]:
    if not 1 <= theta <= domain_size:
        raise ValueError(f"theta must be in [1, {domain_size}]")
    if fanout < 2:
        raise ValueError("fanout must be >= 2")
    c1 = 4.0 * (domain_size - theta) / (domain_size + 1)
    c2 = 8.0 * (fanout - 1) * math.log(theta, fanout) ** 3 * domain_size / (domain_size + 1)
    return c1, c2


def optimal_budget_split(domain_size: int, theta: int, fanout: int, epsilon: float) -> BudgetSplit:
    """Split epsilon between S and H nodes to minimize the error model.

    Minimizing c1/x^2 + c2/(eps-x)^2 gives x* = eps * c1^(1/3) / (c1^(1/3) +
    c2^(1/3)), with minimum (c1^(1/3) + c2^(1/3))^3 / eps^2.  Theta = 1 puts
    the whole budget on S nodes (pure ordered mechanism); theta = |domain|
    puts it on H nodes (pure hierarchical).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    c1, c2 = _error_coefficients(domain_size, theta, fanout)
    a, b = c1 ** (1 / 3), c2 ** (1 / 3)
    if a + b == 0:
        # single-point domain with theta 1: no error either way
        return BudgetSplit(eps_s=epsilon, eps_h=0.0, predicted_mse=0.0, c1=c1, c2=c2)
    eps_s = epsilon * a / (a + b)
    return BudgetSplit(
        eps_s=eps_s,
        eps_h=epsilon - eps_s,
        predicted_mse=(a + b) ** 3 / epsilon**2,
        c1=c1,
        c2=c2,
    )


@dataclass(frozen=True)
class OHNode:
    index: int
    lo: int
    hi: int
    value: float
    scale: float


@dataclass(frozen=True)
class OHTree:
    """Released ordered-hierarchical structure.

    ``s_nodes[i-1]`` holds the noisy prefix count up to position min(i*theta,
    size); ``blocks[b]`` maps (lo, hi) intervals to noisy H nodes of block b.
    For theta >= 2 the block-1 root doubles as s_1.  Positions are 1-based.
    """

    domain_size: int
    theta: int
    fanout: int
    eps_s: float
    eps_h: float
    seed: int
    s_nodes: tuple[OHNode, ...]
    blocks: dict[int, dict[tuple[int, int], OHNode]] = field(compare=False)

    @property
    def k(self) -> int:
        return len(self.s_nodes)

    @property
    def height(self) -> int:
        return _subtree_height(self.theta, self.fanout)

    def nodes(self) -> list[OHNode]:
        seen: set[int] = set()
        out: list[OHNode] = []
        for node in self.s_nodes:
            seen.add(node.index)
            out.append(node)
        for b in sorted(self.blocks):
            for key in sorted(self.blocks[b]):
                node = self.blocks[b][key]
                if node.index not in seen:
                    seen.add(node.index)
                    out.append(node)
        return out

    def to_dict(self) -> dict:
        items = []
        s_indices = set()
        for i, node in enumerate(self.s_nodes, start=1):
            s_indices.add(node.index)
            items.append(
                {
                    "id": f"S{i}",
                    "interval": [node.lo, node.hi],
                    "value": node.value,
                    "scale": node.scale,
                }
            )
        for b in sorted(self.blocks):
            for (lo, hi) in sorted(self.blocks[b]):
                node = self.blocks[b][(lo, hi)]
                if node.index in s_indices:
                    continue
                items.append(
                    {
                        "id": f"H{b}:{lo}-{hi}",
                        "interval": [lo, hi],
                        "value": node.value,
                        "scale": node.scale,
                    }
                )
        return {
            "mechanism": "ordered-hierarchical",
            "domain_size": self.domain_size,
            "theta": self.theta,
            "fanout": self.fanout,
            "eps_s": self.eps_s,
            "eps_h": self.eps_h,
            "seed": self.seed,
            "nodes": items,
        }


def _subtree_height(theta: int, fanout: int) -> int:
    if theta <= 1:
        return 0
    return math.ceil(math.log(theta, fanout) - 1e-12)


def _children(lo: int, hi: int, fanout: int) -> list[tuple[int, int]]:
    width = hi - lo + 1
    delta = math.ceil(width / fanout)
    out = []
    start = lo
    while start <= hi:
        out.append((start, min(start + delta - 1, hi)))
        start += delta
    return out


def _h_index(lo: int, hi: int, size: int) -> int:
    # odd stream indices for H nodes, even (2i) for S nodes
    return (lo * (size + 2) + hi) * 2 + 1


def build_oh_release(
    hist,
    theta: int,
    fanout: int,
    eps_s: float,
    eps_h: float,
    seed: int,
    zero_noise: bool = False,
) -> OHTree:
    """Build the noisy ordered-hierarchical structure over a histogram.

    Noise scales: S nodes s_2..s_k get Laplace(1/eps_s); H nodes of blocks
    2..k get Laplace(2h/eps_h) where h = ceil(log_fanout theta); every node
    of block 1, including its root s_1, gets Laplace(2h/(eps_h + eps_s)).
    At theta = 1 there are no H nodes and s_1 carries the combined budget.

    Blocks 2..k carry no root interval node: the full-block prefix is served
    by the block's own S node, so a root would never be queried, and leaving
    it out keeps a protected change (at most theta positions) perturbing at
    most one S node and at most h H nodes per touched block.
    """
    counts = np.asarray(hist, dtype=np.int64)
    size = int(counts.size)
    if size < 1:
        raise ValueError("histogram must be non-empty")
    if not 1 <= theta <= size:
        raise ValueError(f"theta must be in [1, {size}]")
    if fanout < 2:
        raise ValueError("fanout must be >= 2")
    if eps_s < 0 or eps_h < 0 or eps_s + eps_h <= 0:
        raise ValueError("budgets must be non-negative with a positive total")
    prefix = np.concatenate([[0], np.cumsum(counts)]).astype(float)
    k = math.ceil(size / theta)
    h = _subtree_height(theta, fanout)

    def scale_for(block: int, is_s: bool) -> float:
        if block == 1:
            combined = eps_s + eps_h
            return (1.0 if theta == 1 else 2.0 * h) / combined
        if is_s:
            if eps_s == 0:
                raise ValueError("eps_s must be positive when the structure has S nodes")
            return 1.0 / eps_s
        if eps_h == 0:
            raise ValueError("eps_h must be positive when the structure has H nodes")
        return 2.0 * h / eps_h

    def draw(index: int, scale: float) -> float:
        if zero_noise:
            return 0.0
        return sample_laplace(scale, _node_rng(seed, index))

    s_nodes: list[OHNode] = []
    blocks: dict[int, dict[tuple[int, int], OHNode]] = {}
    for b in range(1, k + 1):
        blo = (b - 1) * theta + 1
        bhi = min(b * theta, size)
        if theta >= 2:
            nodes: dict[tuple[int, int], OHNode] = {}
            if b == 1:
                stack = [(blo, bhi)]
            elif blo < bhi:
                stack = _children(blo, bhi, fanout)
            else:
                stack = []
            while stack:
                lo, hi = stack.pop()
                if b == 1 and (lo, hi) == (blo, bhi):
                    # block-1 root doubles as the first prefix node s_1
                    idx = 2 * 1
                else:
                    idx = _h_index(lo, hi, size)
                scale = scale_for(b, is_s=False)
                value = float(prefix[hi] - prefix[lo - 1]) + draw(idx, scale)
                nodes[(lo, hi)] = OHNode(index=idx, lo=lo, hi=hi, value=value, scale=scale)
                if lo != hi:
                    stack.extend(_children(lo, hi, fanout))
            blocks[b] = nodes
        if b == 1 and theta >= 2:
            s_nodes.append(blocks[1][(blo, bhi)])
        else:
            idx = 2 * b
            scale = scale_for(b, is_s=(b >= 2))
            value = float(prefix[bhi]) + draw(idx, scale)
            s_nodes.append(OHNode(index=idx, lo=1, hi=bhi, value=value, scale=scale))
    return OHTree(
        domain_size=size,
        theta=theta,
        fanout=fanout,
        eps_s=eps_s,
        eps_h=eps_h,
        seed=seed,
        s_nodes=tuple(s_nodes),
        blocks=blocks,
    )


def hierarchical_release(
    hist, fanout: int, epsilon: float, seed: int, zero_noise: bool = False
) -> OHTree:
    """Classical f-ary interval tree baseline with uniform budget per level.

    Built directly (one block spanning the domain, every node holding a noisy
    interval count at scale 2h/epsilon); structurally this is the
    theta = |domain| ordered-hierarchical tree.
    """
    counts = np.asarray(hist, dtype=np.int64)
    size = int(counts.size)
    if size < 1:
        raise ValueError("histogram must be non-empty")
    if fanout < 2:
        raise ValueError("fanout must be >= 2")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    prefix = np.concatenate([[0], np.cumsum(counts)]).astype(float)
    h = _subtree_height(size, fanout)
    scale = (1.0 if size == 1 else 2.0 * h) / epsilon
    nodes: dict[tuple[int, int], OHNode] = {}
    stack = [(1, size)]
    while stack:
        lo, hi = stack.pop()
        idx = 2 * 1 if (lo, hi) == (1, size) else _h_index(lo, hi, size)
        noise = 0.0 if zero_noise else sample_laplace(scale, _node_rng(seed, idx))
        value = float(prefix[hi] - prefix[lo - 1]) + noise
        nodes[(lo, hi)] = OHNode(index=idx, lo=lo, hi=hi, value=value, scale=scale)
        if lo != hi:
            stack.extend(_children(lo, hi, fanout))
    root = nodes[(1, size)]
    return OHTree(
        domain_size=size,
        theta=size,
        fanout=fanout,
        eps_s=0.0,
        eps_h=epsilon,
        seed=seed,
        s_nodes=(root,),
        blocks={1: nodes},
    )


def _block_prefix(tree: OHTree, block: int, target: int) -> float:
    """Sum of H nodes canonically covering [block start, target]."""
    blo = (block - 1) * tree.theta + 1
    bhi = min(block * tree.theta, tree.domain_size)
    nodes = tree.blocks[block]
    total = 0.0
    # walk from the root interval; the block-1 root is materialized (as s_1)
    # while other roots are not, but a strict residual never needs them
    stack = _children(blo, bhi, tree.fanout) if blo < bhi else [(blo, bhi)]
    while stack:
        lo, hi = stack.pop()
        if lo > target:
            continue
        if hi <= target:
            total += nodes[(lo, hi)].value
            continue
        stack.extend(_children(lo, hi, tree.fanout))
    return total


def oh_cumulative(tree: OHTree, j: int) -> float:
    """Unbiased estimate of the prefix count up to position j (1-based).

    A position ending its block is served by that block's prefix node alone;
    otherwise the previous prefix node plus the canonical decomposition of
    the residual inside j's block.  j = 0 gives 0.
    """
    if not 0 <= j <= tree.domain_size:
        raise ValueError(f"position {j} out of range [0, {tree.domain_size}]")
    if j == 0:
        return 0.0
    block = (j + tree.theta - 1) // tree.theta
    if j == min(block * tree.theta, tree.domain_size):
        return float(tree.s_nodes[block - 1].value)
    total = tree.s_nodes[block - 2].value if block >= 2 else 0.0
    return float(total + _block_prefix(tree, block, j))


def oh_range_query(tree: OHTree, i: int, j: int) -> float:
    """Noisy count of positions in [i, j], as a difference of two prefixes."""
    if not 1 <= i <= j <= tree.domain_size:
        raise ValueError(f"invalid range [{i},{j}]")
    return oh_cumulative(tree, j) - oh_cumulative(tree, i - 1)


def oh_inferred_cumulative(tree: OHTree) -> np.ndarray:
    """Optional post-processing: isotonic inference over all prefix estimates."""
    raw = np.array([oh_cumulative(tree, j) for j in range(1, tree.domain_size + 1)])
    return isotonic_inference(raw, lower_bound=0.0)


# -- budget accounting ---------------------------------------------------------


@dataclass(frozen=True)
class BudgetCharge:
    label: str
    epsilon: float
    group: str | None = None

    def __post_init__(self) -> None:
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError("charges must be positive and finite")


class BudgetLedger:
    """Ordered record of privacy charges.

    Ungrouped charges compose sequentially (they sum).  Charges sharing a
    group name ran on disjoint id subsets and contribute only their maximum,
    but the group must be certified first: either the constraint set is
    cardinality-only or a parallel-decomposition check passed.
    """

    def __init__(self) -> None:
        self.charges: list[BudgetCharge] = []
        self.certified_groups: set[str] = set()

    def charge(self, label: str, epsilon: float, group: str | None = None) -> None:
        self.charges.append(BudgetCharge(label, epsilon, group))

    def certify_group(self, group: str) -> None:
        self.certified_groups.add(group)

    def to_dict(self) -> dict:
        return {
            "entries": [
                {"label": c.label, "epsilon": c.epsilon, "group": c.group}
                for c in self.charges
            ],
            "certified_groups": sorted(self.certified_groups),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BudgetLedger":
        ledger = cls()
        for e in data.get("entries", ()):
            ledger.charge(str(e["label"]), float(e["epsilon"]), e.get("group"))
        for g in data.get("certified_groups", ()):
            ledger.certify_group(str(g))
        return ledger


def compose_budgets(ledger: BudgetLedger) -> float:
    """Total privacy cost: sum of sequential charges plus the max within each
    certified parallel group."""
    total = 0.0
    groups: dict[str, float] = {}
    for c in ledger.charges:
        if c.group is None:
            total += c.epsilon
        else:
            if c.group not in ledger.certified_groups:
                raise ValueError(
                    f"parallel group {c.group!r} lacks a decomposition certificate"
                )
            groups[c.group] = max(groups.get(c.group, 0.0), c.epsilon)
    return total + sum(groups.values())
