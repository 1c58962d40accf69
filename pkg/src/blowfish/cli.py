"""Command-line surface.

Subcommands: ``policy validate``, ``sensitivity``, ``release histogram``,
``release cdf``, ``release range``, ``kmeans``, ``experiment run``,
``budget total``.  Every release is reproducible from its flag set; the
flags are echoed into the output file, which is written atomically (no
partial output on error).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .domain import histogram, ingest_dataset, load_domain
from .errors import NonSparseConstraintsError
from .experiments import run_experiment
from .kmeans import ClusteringPolicy, KmeansConfig, kmeans_private
from .mechanisms import (
    BudgetLedger,
    PrivacyParams,
    build_oh_release,
    compose_budgets,
    laplace_mechanism,
    optimal_budget_split,
    ordered_mechanism,
)
from .policy import ConstraintKind, Policy, load_policy
from .sensitivity import (
    ClusterSizeQuery,
    ClusterSumQuery,
    CumulativeQuery,
    Exactness,
    HistogramQuery,
    Method,
    SensitivityResult,
    brute_force_sensitivity,
    closed_form_sensitivity,
    is_sparse,
    sparse_constraint_sensitivity,
    specialized_constraint_sensitivity,
)

QUERY_KINDS = {
    "histogram": lambda args: HistogramQuery(),
    "cumulative": lambda args: CumulativeQuery(),
    "cluster-size": lambda args: ClusterSizeQuery(args.k),
    "cluster-sum": lambda args: ClusterSumQuery(args.k),
}


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_policy_args(args) -> Policy:
    domain = load_domain(_read(args.domain))
    return load_policy(_read(args.policy), domain)


def _resolve_sensitivity(query, policy: Policy, args) -> SensitivityResult:
    method = getattr(args, "method", "auto")
    if method == "closed" or (method == "auto" and policy.constraints.unconstrained):
        res = closed_form_sensitivity(query, policy)
    elif method in ("sparse", "auto"):
        if not isinstance(query, HistogramQuery):
            raise ValueError("constrained sensitivity supports the histogram query only")
        if not is_sparse(policy.constraints, policy.graph):
            raise NonSparseConstraintsError(
                "constraints are not sparse with respect to the secret graph"
            )
        res = sparse_constraint_sensitivity(policy)
    elif method == "specialized":
        res = specialized_constraint_sensitivity(policy)
    elif method == "oracle":
        res = brute_force_sensitivity(query, policy, n=args.n)
    else:
        raise ValueError(f"unknown method {method!r}")
    if getattr(args, "require_exact", False) and res.exactness is not Exactness.EXACT:
        raise ValueError(
            f"sensitivity is an upper bound ({res.value} via {res.method.value}); "
            "drop --require-exact to calibrate noise to it"
        )
    return res


def _cmd_policy_validate(args) -> int:
    policy = _load_policy_args(args)
    n_q = len(policy.constraints.queries)
    sparse_note = ""
    if policy.constraints.kind is ConstraintKind.GENERAL:
        sparse_note = ", sparse" if is_sparse(policy.constraints, policy.graph) else ", non-sparse"
    print(f"ok: domain size {policy.domain.size}, {policy.describe()}, {n_q} queries{sparse_note}")
    return 0


def _cmd_sensitivity(args) -> int:
    policy = _load_policy_args(args)
    query = QUERY_KINDS[args.query](args)
    res = _resolve_sensitivity(query, policy, args)
    value = int(res.value) if float(res.value).is_integer() else res.value
    print(f"{value} {res.exactness.value} {res.method.value}")
    return 0


def _release_payload(args, policy: Policy | None, extra: dict) -> dict:
    payload = {
        "tool": f"blowfish {__version__}",
        "flags": {k: v for k, v in sorted(vars(args).items()) if k != "func" and v is not None},
    }
    if policy is not None:
        payload["policy"] = policy.describe()
    payload.update(extra)
    return payload


def _cmd_release_histogram(args) -> int:
    policy = _load_policy_args(args)
    data = ingest_dataset(_read(args.data), policy.domain)
    counts = histogram(data)
    res = _resolve_sensitivity(HistogramQuery(), policy, args)
    pp = PrivacyParams(epsilon=args.epsilon, seed=args.seed)
    values = laplace_mechanism(counts, res.value, pp)
    payload = _release_payload(
        args,
        policy,
        {
            "mechanism": "laplace-histogram",
            "epsilon": args.epsilon,
            "seed": args.seed,
            "sensitivity": res.value,
            "exactness": res.exactness.value,
            "values": [float(v) for v in values],
        },
    )
    _write_atomic(args.out, _format_payload(payload, args.format))
    return 0


def _cmd_release_cdf(args) -> int:
    domain = load_domain(_read(args.domain))
    data = ingest_dataset(_read(args.data), domain)
    counts = histogram(data)
    released = ordered_mechanism(counts, args.theta, PrivacyParams(args.epsilon, args.seed))
    payload = _release_payload(args, None, released.to_dict())
    payload["policy"] = f"distance(theta={args.theta})|cardinality"
    _write_atomic(args.out, _format_payload(payload, args.format))
    return 0


def _cmd_release_range(args) -> int:
    domain = load_domain(_read(args.domain))
    data = ingest_dataset(_read(args.data), domain)
    counts = histogram(data)
    split = optimal_budget_split(domain.size, args.theta, args.fanout, args.epsilon)
    tree = build_oh_release(counts, args.theta, args.fanout, split.eps_s, split.eps_h, args.seed)
    payload = _release_payload(args, None, tree.to_dict())
    payload["epsilon"] = args.epsilon
    payload["policy"] = f"distance(theta={args.theta})|cardinality"
    _write_atomic(args.out, _format_payload(payload, args.format))
    return 0


def _cmd_kmeans(args) -> int:
    rows = [line.split(",") for line in _read(args.data).strip().splitlines() if line.strip()]
    pts = np.array([[float(v) for v in row] for row in rows])
    bounds = tuple((args.low, args.high) for _ in range(pts.shape[1]))
    policy = ClusteringPolicy(bounds=bounds, kind=args.graph, theta=args.theta)
    cfg = KmeansConfig(k=args.k, iterations=args.iterations)
    result = kmeans_private(pts, cfg, policy, PrivacyParams(args.epsilon, args.seed))
    payload = _release_payload(args, None, result.to_dict())
    payload["mechanism"] = "private-kmeans"
    _write_atomic(args.out, _format_payload(payload, args.format))
    return 0


def _cmd_experiment_run(args) -> int:
    report = run_experiment(_read(args.config))
    _write_atomic(args.out, report.to_csv_string())
    return 0


def _cmd_budget_total(args) -> int:
    ledger = BudgetLedger.from_dict(json.loads(_read(args.ledger)))
    print(format(compose_budgets(ledger), ".12g"))
    return 0


def _format_payload(payload: dict, fmt: str) -> str:
    if fmt == "csv":
        lines = ["key,value"]
        for k, v in payload.items():
            if isinstance(v, (list, dict)):
                v = json.dumps(v)
            lines.append(f"{k},{json.dumps(v) if ',' in str(v) else v}")
        return "\n".join(lines) + "\n"
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blowfish", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_policy = sub.add_parser("policy", help="policy file tools")
    policy_sub = p_policy.add_subparsers(dest="subcommand", required=True)
    p_validate = policy_sub.add_parser("validate", help="check a policy file")
    p_validate.add_argument("--domain", required=True)
    p_validate.add_argument("--policy", required=True)
    p_validate.set_defaults(func=_cmd_policy_validate)

    p_sens = sub.add_parser("sensitivity", help="policy-specific sensitivity")
    p_sens.add_argument("--query", choices=sorted(QUERY_KINDS), default="histogram")
    p_sens.add_argument("--domain", required=True)
    p_sens.add_argument("--policy", required=True)
    p_sens.add_argument("--method", choices=["auto", "closed", "sparse", "specialized", "oracle"], default="auto")
    p_sens.add_argument("--k", type=int, default=2, help="cluster count for cluster queries")
    p_sens.add_argument("--n", type=int, default=2, help="database size for the oracle method")
    p_sens.add_argument("--require-exact", action="store_true")
    p_sens.set_defaults(func=_cmd_sensitivity)

    p_release = sub.add_parser("release", help="noisy releases")
    release_sub = p_release.add_subparsers(dest="subcommand", required=True)

    def _common_release(p, with_policy: bool) -> None:
        p.add_argument("--domain", required=True)
        if with_policy:
            p.add_argument("--policy", required=True)
        p.add_argument("--data", required=True)
        p.add_argument("--epsilon", type=float, required=True)
        p.add_argument("--seed", type=int, required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--format", choices=["json", "csv"], default="json")

    p_hist = release_sub.add_parser("histogram", help="Laplace histogram release")
    _common_release(p_hist, with_policy=True)
    p_hist.add_argument("--method", choices=["auto", "closed", "sparse", "specialized"], default="auto")
    p_hist.add_argument("--require-exact", action="store_true")
    p_hist.set_defaults(func=_cmd_release_histogram)

    p_cdf = release_sub.add_parser("cdf", help="ordered-mechanism cumulative release")
    _common_release(p_cdf, with_policy=False)
    p_cdf.add_argument("--theta", type=int, default=1)
    p_cdf.set_defaults(func=_cmd_release_cdf)

    p_range = release_sub.add_parser("range", help="ordered-hierarchical tree release")
    _common_release(p_range, with_policy=False)
    p_range.add_argument("--theta", type=int, required=True)
    p_range.add_argument("--fanout", type=int, default=16)
    p_range.set_defaults(func=_cmd_release_range)

    p_km = sub.add_parser("kmeans", help="private k-means over numeric CSV data")
    p_km.add_argument("--data", required=True, help="headerless numeric CSV")
    p_km.add_argument("--k", type=int, required=True)
    p_km.add_argument("--iterations", type=int, default=10)
    p_km.add_argument("--epsilon", type=float, required=True)
    p_km.add_argument("--seed", type=int, required=True)
    p_km.add_argument("--graph", choices=["full", "distance", "attribute"], default="full")
    p_km.add_argument("--theta", type=float, default=0.0)
    p_km.add_argument("--low", type=float, default=0.0)
    p_km.add_argument("--high", type=float, default=1.0)
    p_km.add_argument("--out", required=True)
    p_km.add_argument("--format", choices=["json", "csv"], default="json")
    p_km.set_defaults(func=_cmd_kmeans)

    p_exp = sub.add_parser("experiment", help="seeded evaluation harness")
    exp_sub = p_exp.add_subparsers(dest="subcommand", required=True)
    p_run = exp_sub.add_parser("run", help="run a config and write CSV")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.set_defaults(func=_cmd_experiment_run)

    p_budget = sub.add_parser("budget", help="privacy budget accounting")
    budget_sub = p_budget.add_subparsers(dest="subcommand", required=True)
    p_total = budget_sub.add_parser("total", help="total a ledger file")
    p_total.add_argument("--ledger", required=True)
    p_total.set_defaults(func=_cmd_budget_total)

    return parser


def cli_main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
