import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from skillflow.cli import main
from skillflow.simulate import no_ai_time_to_reach


def run(*args):
    return main([str(a) for a in args])


def read_csv(path):
    with open(path) as f:
        return list(csv.DictReader(f))


def test_simulate_without_delegation(tmp_path):
    assert run("simulate", "--theta0", 0.4, "--p0", 0, "--t-end", 50, "--out", tmp_path) == 0
    rows = read_csv(tmp_path / "trajectory.csv")
    assert list(rows[0]) == ["t", "theta", "p"]
    assert all(float(r["p"]) == 0.0 for r in rows)
    final = float(rows[-1]["theta"])
    assert no_ai_time_to_reach(0.4, final) == pytest.approx(50.0, abs=1e-5)
    info = json.loads((tmp_path / "trajectory.json").read_text())
    assert info["terminal"] == "HighSkill"
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["command"] == "simulate"
    assert sorted(man["outputs"]) == ["trajectory.csv", "trajectory.json"]
    assert man["config"]["theta_a"] == 0.5 and man["config"]["variant"] == "Simplified"
    assert man["seeds"] == {"seed": 0}


def test_csv_number_format(tmp_path):
    run("simulate", "--t-end", 1, "--record-every", 100, "--out", tmp_path)
    for r in read_csv(tmp_path / "trajectory.csv"):
        for v in r.values():
            assert "e" not in v
            digits = v.replace("-", "").replace(".", "").lstrip("0")
            assert len(digits) <= 12


def test_equilibria(tmp_path):
    assert run("equilibria", "--theta-a", 0.5, "--kappa", 3, "--delta", 2, "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "equilibria.json").read_text())
    eqs = doc["equilibria"]
    assert len(eqs) == 5
    saddle = [e for e in eqs if e["kind"] == "Saddle"][0]
    assert saddle["theta"] == 0.5 and saddle["p"] == pytest.approx(0.3333, abs=1e-4)
    assert set(eqs[0]) == {"theta", "p", "kind", "eigenvalues", "eigenvectors"}


def test_estimate(tmp_path, worked_table):
    assert run("estimate", "--input", worked_table, "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "estimate.json").read_text())
    assert doc["estimates"]["theta_a"] == pytest.approx(0.80)
    assert doc["prediction"]["label"] == "Low"
    assert {"estimates", "sample_counts", "excluded_steps", "prediction"} <= set(doc)


def test_separatrix_basin_gap_crossing(tmp_path):
    assert run("separatrix", "--resolution", 64, "--out", tmp_path / "s") == 0
    rows = read_csv(tmp_path / "s" / "separatrix.csv")
    assert len(rows) == 64 and list(rows[0]) == ["theta", "p"]
    assert "m_dagger" in json.loads((tmp_path / "s" / "separatrix.json").read_text())["approximation"]

    assert run("basin", "--n-theta", 3, "--n-p", 2, "--out", tmp_path / "b") == 0
    lines = (tmp_path / "b" / "basin.csv").read_text().splitlines()
    assert lines[0] == "theta\\p,0.25,0.75" and len(lines) == 4

    assert run("gap", "--t-end", 2, "--out", tmp_path / "g") == 0
    assert (tmp_path / "g" / "gap.csv").read_text().startswith("t,gap\n")

    assert run("crossing", "--theta-a", 0.78, "--out", tmp_path / "c") == 0
    res = json.loads((tmp_path / "c" / "crossing.json").read_text())
    assert res["t_c"] == pytest.approx(3.9586, abs=1e-3)

    assert run("crossing-curve", "--values", "0.3,0.6", "--out", tmp_path / "cc") == 0
    rows = read_csv(tmp_path / "cc" / "crossing_curve.csv")
    assert [float(r["theta_a"]) for r in rows] == [0.3, 0.6] and float(rows[0]["t_c"]) == 0.0


@pytest.mark.parametrize(
    "cmd",
    [
        ["separatrix", "--resolution", "64"],
        ["simulate", "--mode", "sde", "--t-end", "3", "--seed", "4"],
        ["simulate", "--mode", "discrete", "--t-end", "1", "--eta", "0.001"],
        ["basin", "--method", "sde", "--n-theta", "2", "--n-p", "2", "--n-samples", "5", "--sde-t-end", "10"],
    ],
    ids=lambda c: "-".join(c[:3]),
)
def test_manifest_reproduces_outputs(tmp_path, cmd):
    assert run(*cmd, "--out", tmp_path / "a") == 0
    assert run(cmd[0], "--config", tmp_path / "a" / "manifest.json", "--out", tmp_path / "b") == 0
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    for rel in man["outputs"]:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("theta_a = 0.7\nkappa = 2\n")
    assert run("equilibria", "--config", cfg, "--kappa", 4, "--out", tmp_path) == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["config"]["theta_a"] == 0.7 and man["config"]["kappa"] == 4.0


def test_variant_from_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("variant = JaggedAI\nsupport = 1, 0\nweights = 0.96, 0.04\n")
    assert run("equilibria", "--config", cfg, "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "equilibria.json").read_text())
    assert doc["equilibria"][-1]["theta"] == pytest.approx(0.8)


@pytest.mark.parametrize(
    "args",
    [
        ["simulate", "--bogus", "1"],
        ["simulate", "--theta0", "abc"],
        ["simulate", "--mode", "magic"],
        ["equilibria", "--kappa", "-1"],
        ["estimate"],
        ["frobnicate"],
        ["sweep", "--op", "simulate"],
        ["sweep", "--op", "nothing", "--vary", "kappa"],
        ["sweep", "--op", "simulate", "--vary", "colour"],
    ],
)
def test_usage_errors_exit_2(tmp_path, capsys, args):
    assert run(*args, "--out", tmp_path, "--error-json") == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["exit_code"] == 2 and err["message"]


def test_unknown_config_key_exit_2(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    assert run("equilibria", "--config", cfg, "--out", tmp_path) == 2


def test_numeric_error_exit_1(tmp_path, capsys):
    assert run("crossing", "--p0", 0, "--out", tmp_path, "--error-json") == 1
    err = json.loads(capsys.readouterr().err)
    assert err == {"error": "DomainError", "exit_code": 1, "message": err["message"]}
    assert run("equilibria", "--theta-a", 1.0, "--out", tmp_path) == 1


def test_sweep_separatrix(tmp_path):
    assert run("sweep", "--op", "separatrix", "--vary", "theta_a", "--values", "0.01,0.5,0.99",
               "--set", "resolution=128", "--jobs", 1, "--out", tmp_path) == 0
    rows = read_csv(tmp_path / "index.csv")
    assert [r["theta_a"] for r in rows] == ["0.01", "0.5", "0.99"]
    assert all(r["status"] == "ok" for r in rows)
    for i in range(3):
        assert (tmp_path / f"point_{i:03d}" / "separatrix.csv").exists()
    assert float(rows[1]["saddle_p"]) == pytest.approx(1 / 3)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert "index.csv" in man["outputs"] and "point_002/separatrix.csv" in man["outputs"]


def test_sweep_parallel_matches_serial(tmp_path):
    args = ["sweep", "--op", "crossing", "--vary", "theta_a", "--range", "0.4:0.8:0.1", "--theta0", "0.4", "--p0", "0.3"]
    assert run(*args, "--jobs", 1, "--out", tmp_path / "a") == 0
    assert run(*args, "--jobs", 2, "--out", tmp_path / "b") == 0
    a = (tmp_path / "a" / "index.csv").read_bytes()
    assert a == (tmp_path / "b" / "index.csv").read_bytes()
    t_c = [float(r["t_c"]) for r in read_csv(tmp_path / "a" / "index.csv")]
    assert len(t_c) == 5 and t_c[0] == 0.0 and t_c == sorted(t_c)


def test_sweep_empty_list(tmp_path):
    assert run("sweep", "--op", "crossing", "--vary", "theta_a", "--values", "", "--out", tmp_path) == 0
    assert (tmp_path / "index.csv").read_text() == "index,theta_a,status,dir,error\n"


def test_sweep_records_failures(tmp_path):
    assert run("sweep", "--op", "crossing", "--vary", "p0", "--values", "0.3,0", "--out", tmp_path) == 1
    rows = read_csv(tmp_path / "index.csv")
    assert [r["status"] for r in rows] == ["ok", "error"]
    assert "DomainError" in rows[1]["error"]


def test_sweep_from_config_file(tmp_path):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text("op = equilibria\nvary = delta\nvalues = 1, 2\ntheta_a = 0.6\n")
    assert run("sweep", "--config", cfg, "--out", tmp_path / "o") == 0
    rows = read_csv(tmp_path / "o" / "index.csv")
    assert [float(r["saddle_p"]) for r in rows] == pytest.approx([0.4 / (0.4 + 0.6), 0.4 / (0.4 + 1.2)])
    assert run("sweep", "--config", tmp_path / "o" / "manifest.json", "--out", tmp_path / "p") == 0
    assert (tmp_path / "o" / "index.csv").read_bytes() == (tmp_path / "p" / "index.csv").read_bytes()


def test_env_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("SKILLFLOW_OUT_DIR", str(tmp_path / "env"))
    monkeypatch.setenv("SKILLFLOW_JOBS", "1")
    assert run("sweep", "--op", "equilibria", "--vary", "kappa", "--values", "1,2") == 0
    assert (tmp_path / "env" / "index.csv").exists()


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "skillflow", "equilibria", "--out", str(tmp_path)], capture_output=True, text=True
    )
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "skillflow", "nope"], capture_output=True, text=True)
    assert proc.returncode == 2
