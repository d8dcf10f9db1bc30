import json

import pytest

from replitest.harness.cli import main
from replitest.harness.reports import read_csv

HYPOTHESES = [[0.7, 0.1, 0.1, 0.1], [0.1, 0.1, 0.1, 0.7]]

COMMANDS = {
    "coin": ["coin", "--trials", "100"],
    "uniformity": ["uniformity", "--n", "20", "--trials", "100"],
    "closeness": ["closeness", "--trials", "100"],
    "gaussian": ["gaussian", "--d", "4", "--m", "100", "--alpha", "4", "--trials", "100"],
    "sweep": ["sweep", "--trials", "100"],
    "chain-report": ["chain-report", "--t", "20"],
    "calibrate": ["calibrate", "--n", "20", "--trials", "300"],
}


def run_twice(tmp_path, argv, extra=()):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}.txt"
        assert main(argv + ["--seed", "3", "--out", str(out)] + list(extra)) in (0, 2)
        outs.append(out.read_bytes())
    return outs


@pytest.mark.parametrize("name", sorted(COMMANDS))
def test_outputs_are_byte_identical(tmp_path, name):
    a, b = run_twice(tmp_path, COMMANDS[name])
    assert a == b and len(a) > 0


def test_select_from_hypothesis_file(tmp_path):
    hyp = tmp_path / "h.json"
    hyp.write_text(json.dumps(HYPOTHESES))
    a, b = run_twice(tmp_path, ["select", "--hypotheses", str(hyp), "--rho", "0.5", "--eps", "0.5", "--trials", "100", "--planted", "1"])
    assert a == b
    row = read_csv(a.decode())[0]
    assert row["distribution_id"] == "planted-1"
    assert float(row["accuracy"]) >= 0.9


def test_replicability_config(tmp_path):
    cfg = {
        "tester": "coin",
        "params": {"p0": 0.5, "q0": 0.7, "rho": 0.2, "delta": 0.05},
        "distributions": [{"id": "mid", "kind": "bernoulli", "p": 0.6}],
        "trials": 100,
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    a, b = run_twice(tmp_path, ["replicability", "--config", str(path)])
    assert a == b
    payload = json.loads(a)
    assert payload["schema"] == 1
    assert payload["result"]["reports"][0]["distribution_id"] == "mid"


def test_grid_rows_have_checks(tmp_path):
    out = tmp_path / "coin.csv"
    assert main(["coin", "--trials", "100", "--out", str(out), "--check"]) == 0
    rows = read_csv(out.read_text())
    assert {r["expected"] for r in rows} >= {"accept", "reject"}
    assert all(r["disagreement_ok"] == "true" for r in rows)


def test_check_failure_exit_code(tmp_path):
    cfg = {
        "tester": "coin",
        "params": {"rho": 0.2, "check": {"max_disagreement": 0.0}},
        "distributions": [{"id": "mid", "kind": "bernoulli", "p": 0.6}],
        "trials": 200,
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "o.csv"
    assert main(["coin", "--config", str(path), "--out", str(out), "--check"]) == 2
    assert main(["coin", "--config", str(path), "--out", str(out)]) == 0


def test_chain_report_dump(tmp_path):
    dump = tmp_path / "chain.json"
    out = tmp_path / "report.json"
    code = main(["chain-report", "--t", "5", "--m", "10", "--dump-chain", str(dump), "--out", str(out), "--check"])
    assert code == 0
    assert json.loads(dump.read_text())["kind"] == "coin"
    assert json.loads(out.read_text())["result"]["all_below_half"] is True


def test_errors_exit_one(tmp_path, capsys):
    assert main(["select", "--trials", "100", "--out", str(tmp_path / "x")]) == 1
    assert main(["coin", "--config", str(tmp_path / "missing.json")]) == 1
    assert "error" in capsys.readouterr().err
