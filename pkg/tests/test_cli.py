import csv
import json
import math
import os
import subprocess
import sys

import pytest

from gridmarket import cli
from gridmarket.checks import CheckResult
from gridmarket.errors import NonConvergenceError
from gridmarket.report import parse_interval_table, summarize
from gridmarket.scenario_io import DATA_DIR


def scenario_copy(tmp_path, name="paper-emergency", edit_cfg=None, edit_feeder=None):
    cfg = json.loads((DATA_DIR / "scenarios" / f"{name}.json").read_text())
    feeder = (DATA_DIR / "feeders" / "ieee33.feeder").read_text()
    if edit_feeder:
        feeder = edit_feeder(feeder)
    (tmp_path / "feeder.feeder").write_text(feeder)
    cfg["feeder"] = "feeder.feeder"
    cfg["profiles"] = str(DATA_DIR / "profiles" / "july_day.csv")
    if edit_cfg:
        edit_cfg(cfg)
    p = tmp_path / "scenario.json"
    p.write_text(json.dumps(cfg))
    return str(p)


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert cli.main(["run", "paper-emergency", "--out-dir", str(out)]) == 0
    return out


def test_list(capsys):
    assert cli.main(["list"]) == 0
    assert "paper-emergency" in capsys.readouterr().out.split()


def test_run_writes_report(run_dir):
    for name in ("intervals.csv", "dlmp.csv", "ri.csv", "atp.csv", "orders.csv", "matches.csv", "vetting.csv",
                 "summary.json"):
        assert (run_dir / name).is_file(), name
    assert len(parse_interval_table(run_dir / "intervals.csv")) == 96
    with open(run_dir / "dlmp.csv") as fh:
        header = next(csv.reader(fh))
    assert header == ["t"] + [str(i) for i in range(1, 34)]


def test_summary_round_trip(run_dir):
    doc = json.loads((run_dir / "summary.json").read_text())
    assert doc["scenario"] == "paper-emergency"
    assert doc["config"]["seed"] == 2024
    again = summarize(parse_interval_table(run_dir / "intervals.csv"))
    assert set(again) == set(doc["summary"])
    for k, v in again.items():
        assert math.isclose(v, doc["summary"][k], rel_tol=1e-9, abs_tol=1e-9), k


def test_no_p2p_has_no_ledger(tmp_path):
    assert cli.main(["run", "paper-emergency", "--no-p2p", "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "intervals.csv").is_file()
    assert not (tmp_path / "matches.csv").exists()


def test_missing_file(capsys):
    assert cli.main(["run", "/no/such/scenario.json"]) == 2
    assert "not found" in capsys.readouterr().err


def test_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert cli.main(["run", str(p), "--out-dir", str(tmp_path)]) == 2


def test_cycle_feeder_fails_validation(tmp_path, capsys):
    path = scenario_copy(tmp_path, edit_feeder=lambda text: text.replace(
        "[generators]", "[generators]").replace("\n\n[generators]", "\n7, 21, 2.0, 2.0, 5000\n\n[generators]"))
    assert cli.main(["check", path]) == 3
    assert "cycle" in capsys.readouterr().err


def test_low_voll_fails_validation(tmp_path, capsys):
    path = scenario_copy(tmp_path, edit_cfg=lambda c: c.update(voll=10.0))
    assert cli.main(["check", path]) == 3
    assert "VOLL" in capsys.readouterr().err


def test_solver_error_exit(monkeypatch, tmp_path):
    def boom(*a, **k):
        raise NonConvergenceError("iteration cap reached")
    monkeypatch.setattr(cli, "run_simulation", boom)
    assert cli.main(["run", "paper-emergency", "--out-dir", str(tmp_path)]) == 4


def test_check_breach_exit(monkeypatch):
    monkeypatch.setattr(cli, "run_checks", lambda *a, **k: [CheckResult("x", False, "broken")])
    assert cli.main(["check", "paper-emergency"]) == 5


def test_check_passes(capsys):
    assert cli.main(["check", "paper-emergency", "--fd-oracle-sample", "2"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "checks passed" in out


def read_comparison(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_compare(tmp_path):
    assert cli.main(["compare", "paper-emergency", "--out-dir", str(tmp_path)]) == 0
    rows = read_comparison(tmp_path / "comparison.csv")
    assert len(rows) == 96
    assert all(float(r["ri_with"]) >= float(r["ri_without"]) for r in rows)
    assert any(float(r["ri_delta"]) > 0 for r in rows)
    assert (tmp_path / "with_p2p" / "matches.csv").is_file()
    assert not (tmp_path / "without_p2p" / "matches.csv").exists()


def test_compare_without_outage(tmp_path):
    assert cli.main(["compare", "normal", "--out-dir", str(tmp_path)]) == 0
    rows = read_comparison(tmp_path / "comparison.csv")
    assert all(float(r["ri_with"]) == 100.0 == float(r["ri_without"]) for r in rows)


def test_seed_leaves_ri_unchanged(tmp_path):
    for seed in (1, 2):
        assert cli.main(["compare", "paper-emergency", "--seed", str(seed), "--out-dir", str(tmp_path / str(seed))]) == 0
    a = [r["ri_with"] for r in read_comparison(tmp_path / "1" / "comparison.csv")]
    b = [r["ri_with"] for r in read_comparison(tmp_path / "2" / "comparison.csv")]
    assert a == b


SNIPPET = """
import json
from gridmarket import _accel
from gridmarket.report import interval_row
from gridmarket.scenario_io import load_scenario
from gridmarket.simkernel import run_simulation
net, prof, cfg = load_scenario("paper-emergency")
recs = run_simulation(net, prof, cfg, intervals=[40, 56, 64])
print(json.dumps({"numba": _accel.USE_NUMBA, "rows": [interval_row(r, 15.0) for r in recs]}))
"""


def run_snippet(flag):
    env = dict(os.environ, GRIDMARKET_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", SNIPPET], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def test_numba_switch_gives_same_results():
    jit, plain = run_snippet("1"), run_snippet("0")
    assert jit["numba"] is True and plain["numba"] is False
    for a, b in zip(jit["rows"], plain["rows"]):
        for x, y in zip(a, b):
            try:
                assert math.isclose(float(x), float(y), rel_tol=1e-9, abs_tol=1e-9)
            except ValueError:
                assert x == y
