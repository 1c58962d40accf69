import json
from pathlib import Path

import pytest

from blowfish.cli import cli_main

DATA = Path(__file__).resolve().parent.parent / "data"

DOMAIN = str(DATA / "domain_abc.json")
POLICY_MARGINAL = str(DATA / "policy_marginal.json")
ROWS = str(DATA / "rows_abc.csv")
LEDGER = str(DATA / "ledger_example.json")


def test_policy_validate_ok(capsys):
    assert cli_main(["policy", "validate", "--domain", DOMAIN, "--policy", POLICY_MARGINAL]) == 0
    out = capsys.readouterr().out
    assert "ok:" in out and "sparse" in out


def test_policy_validate_malformed(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli_main(["policy", "validate", "--domain", DOMAIN, "--policy", str(bad)]) == 1
    assert "error:" in capsys.readouterr().err


def test_sensitivity_marginal_policy(capsys):
    assert (
        cli_main(["sensitivity", "--query", "histogram", "--domain", DOMAIN, "--policy", POLICY_MARGINAL])
        == 0
    )
    assert capsys.readouterr().out.strip() == "8 UpperBound SparseEngine"


def test_sensitivity_require_exact_blocks_bound(capsys):
    rc = cli_main(
        [
            "sensitivity",
            "--query",
            "histogram",
            "--domain",
            DOMAIN,
            "--policy",
            POLICY_MARGINAL,
            "--require-exact",
        ]
    )
    assert rc == 1
    assert "upper bound" in capsys.readouterr().err


def test_sensitivity_specialized_method(capsys):
    rc = cli_main(
        [
            "sensitivity",
            "--query",
            "histogram",
            "--domain",
            DOMAIN,
            "--policy",
            POLICY_MARGINAL,
            "--method",
            "specialized",
        ]
    )
    assert rc == 0
    assert capsys.readouterr().out.strip() == "8 Exact Specialized"


def test_release_cdf_deterministic(tmp_path):
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    args = [
        "release",
        "cdf",
        "--domain",
        DOMAIN,
        "--data",
        ROWS,
        "--theta",
        "1",
        "--epsilon",
        "1.0",
        "--seed",
        "7",
    ]
    assert cli_main(args + ["--out", str(out1)]) == 0
    assert cli_main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes().replace(b"a.json", b"") == out2.read_bytes().replace(b"b.json", b"")
    payload = json.loads(out1.read_text())
    assert payload["mechanism"] == "ordered"
    assert len(payload["values"]) == 12
    assert payload["flags"]["seed"] == 7


def test_release_histogram_and_require_exact(tmp_path, capsys):
    out = tmp_path / "hist.json"
    base = [
        "release",
        "histogram",
        "--domain",
        DOMAIN,
        "--policy",
        POLICY_MARGINAL,
        "--data",
        ROWS,
        "--epsilon",
        "1.0",
        "--seed",
        "3",
        "--out",
        str(out),
    ]
    assert cli_main(base) == 0
    payload = json.loads(out.read_text())
    assert payload["sensitivity"] == 8.0
    assert payload["exactness"] == "UpperBound"
    assert len(payload["values"]) == 12

    blocked = tmp_path / "blocked.json"
    rc = cli_main(base[:-1] + [str(blocked), "--require-exact"])
    assert rc == 1
    assert not blocked.exists()  # no partial output on error


def test_release_histogram_malformed_policy_writes_nothing(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"graph": {"kind": "nope"}}')
    out = tmp_path / "never.json"
    rc = cli_main(
        [
            "release",
            "histogram",
            "--domain",
            DOMAIN,
            "--policy",
            str(bad),
            "--data",
            ROWS,
            "--epsilon",
            "1",
            "--seed",
            "1",
            "--out",
            str(out),
        ]
    )
    assert rc == 1
    assert not out.exists()


def test_release_range(tmp_path):
    out = tmp_path / "tree.json"
    rc = cli_main(
        [
            "release",
            "range",
            "--domain",
            DOMAIN,
            "--data",
            ROWS,
            "--theta",
            "4",
            "--fanout",
            "2",
            "--epsilon",
            "0.5",
            "--seed",
            "11",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    payload = json.loads(out.read_text())
    assert payload["mechanism"] == "ordered-hierarchical"
    assert any(n["id"] == "S1" for n in payload["nodes"])


def test_kmeans_cli(tmp_path):
    data = tmp_path / "pts.csv"
    data.write_text("0.1,0.2\n0.15,0.1\n0.8,0.9\n0.85,0.95\n0.5,0.5\n")
    out = tmp_path / "clusters.json"
    rc = cli_main(
        [
            "kmeans",
            "--data",
            str(data),
            "--k",
            "2",
            "--iterations",
            "3",
            "--epsilon",
            "1.0",
            "--seed",
            "5",
            "--graph",
            "distance",
            "--theta",
            "0.25",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    payload = json.loads(out.read_text())
    assert len(payload["centroids"]) == 2
    assert payload["epsilon_spent"] == pytest.approx(1.0)


def test_budget_total(capsys, tmp_path):
    assert cli_main(["budget", "total", "--ledger", LEDGER]) == 0
    assert capsys.readouterr().out.strip() == "1.4"
    uncertified = tmp_path / "ledger.json"
    uncertified.write_text(json.dumps({"entries": [{"label": "x", "epsilon": 0.5, "group": "g"}]}))
    assert cli_main(["budget", "total", "--ledger", str(uncertified)]) == 1


def test_experiment_run(tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text(
        json.dumps(
            {
                "experiment": "cdf-release",
                "seed": 2,
                "domain_size": 20,
                "data": {"kind": "uniform", "n": 200},
                "trials": 2,
                "thetas": [1],
                "epsilons": [1.0],
            }
        )
    )
    out = tmp_path / "report.csv"
    assert cli_main(["experiment", "run", "--config", str(config), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("experiment,mechanism")
    assert len(lines) == 2
    rc = cli_main(["experiment", "run", "--config", str(config), "--out", str(tmp_path / "r2.csv")])
    assert rc == 0
    assert (tmp_path / "r2.csv").read_text() == out.read_text()


def test_unknown_experiment_nonzero(tmp_path, capsys):
    config = tmp_path / "cfg.json"
    config.write_text('{"experiment": "mystery"}')
    rc = cli_main(["experiment", "run", "--config", str(config), "--out", str(tmp_path / "x.csv")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err
    assert not (tmp_path / "x.csv").exists()