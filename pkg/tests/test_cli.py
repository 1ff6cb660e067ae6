import csv
import json
import subprocess
import sys

import pytest

from ms2gd.cli import main

RIDGE = ["--synthetic", "n=200,d=8,seed=2,noise=0.1", "--loss", "ridge", "--lambda", "0.01"]
SOLVERS = ["--solver", "ms2gd:b=8,h=0.3,m=100", "--solver", "ms2gd:b=1,h=0.2,m=200",
           "--solver", "sgd:b=1,h=0.05"]


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _train(tmp_path, name, *extra):
    out = tmp_path / name
    code = main(["train", *RIDGE, *SOLVERS, "--epochs", "4", "--out-dir", str(out), *extra])
    return code, out


def test_train_writes_traces_and_manifest(tmp_path):
    code, out = _train(tmp_path, "a")
    assert code == 0
    traces = sorted(p.name for p in out.glob("*.csv") if not p.name.endswith("_ideal.csv"))
    assert traces == ["run0_ms2gd_b8_seed0.csv", "run1_ms2gd_b1_seed0.csv", "run2_sgd_b1_seed0.csv"]
    rows = _read_csv(out / traces[0])
    assert list(rows[0]) == ["epoch", "effective_passes", "objective", "gap", "evaluations", "seconds"]
    assert len(rows) == 5
    assert all(r["seconds"] == "" for r in rows)
    assert float(rows[-1]["gap"]) < float(rows[0]["gap"])
    ideal = _read_csv(out / "run0_ms2gd_b8_seed0_ideal.csv")
    assert float(ideal[-1]["effective_passes"]) < float(rows[-1]["effective_passes"])
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["runs"]) == 3
    assert manifest["runs"][0]["feasibility"]["stepsize_condition"] is True
    assert 0 < manifest["runs"][0]["predicted_rho"] < 1


def test_train_is_byte_deterministic(tmp_path):
    _, a = _train(tmp_path, "a", "--seed", "3,4")
    _, b = _train(tmp_path, "b", "--seed", "3,4")
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    assert len(names) == 6 + 2 * 2 + 1
    for name in names:
        if name == "manifest.json":
            continue
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_train_auto_hyperparameters(tmp_path, capsys):
    out = tmp_path / "auto"
    code = main(["train", *RIDGE, "--solver", "ms2gd:b=8", "--rho-target", "0.5",
                 "--epochs", "2", "--out-dir", str(out), "--no-reference"])
    assert code == 0
    run = json.loads((out / "manifest.json").read_text())["runs"][0]
    assert run["predicted_rho"] <= 0.5 + 1e-9
    assert _read_csv(out / "run0_ms2gd_b8_seed0.csv")[0]["gap"] == ""
    capped = main(["train", *RIDGE, "--solver", "ms2gd:b=1", "--rho-target", "0.01",
                   "--epochs", "1", "--out-dir", str(tmp_path / "cap"), "--no-reference"])
    assert capped == 0
    assert "capped" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["--solver", "adam:b=2"],
    ["--solver", "sgd:b=2"],
    ["--solver", "ms2gd:b=8,h=0.3,m=10,zz=1"],
    ["--solver", "ms2gd:b=8"],
    ["--solver", "ms2gd:b=8,h=5,m=10"],
    ["--solver", "ms2gd:b=500,h=0.1,m=10"],
])
def test_train_usage_errors(tmp_path, argv):
    assert main(["train", *RIDGE, *argv, "--out-dir", str(tmp_path)]) == 2


def test_unknown_solver_exits_2_from_shell(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ms2gd", "train", *RIDGE, "--solver", "nope",
                           "--out-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 2
    assert "unknown solver" in proc.stderr
    proc = subprocess.run([sys.executable, "-m", "ms2gd", "frobnicate"], capture_output=True)
    assert proc.returncode == 2


def test_allow_infeasible_runs(tmp_path):
    code = main(["train", *RIDGE, "--solver", "ms2gd:b=8,h=5,m=10", "--allow-infeasible",
                 "--epochs", "1", "--out-dir", str(tmp_path), "--no-reference"])
    assert code == 0
    run = json.loads((tmp_path / "manifest.json").read_text())["runs"][0]
    assert run["predicted_rho"] is None


def test_divergence_exits_1(tmp_path):
    code = main(["train", *RIDGE, "--solver", "sgd:b=1,h=80", "--epochs", "30",
                 "--out-dir", str(tmp_path), "--no-reference"])
    assert code == 1


def test_plan_small_mu_single_sample(capsys):
    assert main(["plan", "--rho-target", "0.01", "--b", "1", "--n", "1000", "--L", "1",
                 "--mu", "0.001"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert {"h_tilde", "h_star", "m_star_real", "m_star_int", "regime", "predicted_rho"} <= set(d)
    assert d["regime"] == "uncapped"
    assert d["h_star"] == pytest.approx(1.2376e-3, rel=1e-4)
    assert d["m_star_int"] >= d["m_star_real"]


def test_plan_degenerate_and_csv(capsys):
    assert main(["plan", "--rho-target", "0.1", "--b", "50", "--n", "50", "--L", "1",
                 "--mu", "0.1", "--format", "csv"]) == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert rows[0]["regime"] == "degenerate_alpha_zero"
    assert rows[0]["h_tilde"] == ""


@pytest.mark.parametrize("rho", ["1.5", "0", "-2"])
def test_plan_rejects_bad_target(rho):
    assert main(["plan", "--rho-target", rho, "--b", "1", "--n", "10", "--L", "1",
                 "--mu", "0.1"]) == 2


def test_speedup_single_row(capsys):
    assert main(["speedup", "--rho-target", "0.1", "--n", "1000", "--L", "1", "--mu", "0.001",
                 "--b-max", "1"]) == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert len(rows) == 1
    assert float(rows[0]["work_ratio"]) == 1.0


@pytest.mark.parametrize("rho", ["0.01", "0.1"])
def test_speedup_full_curve(tmp_path, rho):
    out = tmp_path / "curve.csv"
    assert main(["speedup", "--rho-target", rho, "--n", "1000", "--L", "1", "--mu", "0.001",
                 "--b-max", "1000", "--out", str(out)]) == 0
    rows = _read_csv(out)
    assert [int(r["b"]) for r in rows] == list(range(1, 1001))
    regimes = [r["regime"] for r in rows]
    first_capped = regimes.index("capped_at_1_over_L")
    assert set(regimes[:first_capped]) == {"uncapped"}
    assert "uncapped" not in regimes[first_capped:]
    assert all(float(r["work_ratio"]) >= 1 - 1e-12 for r in rows[:first_capped])


def test_reference_one_dimensional_ridge(tmp_path, capsys):
    data = tmp_path / "pair.svm"
    data.write_text("1 1:1\n-1 1:-1\n")
    lam = 0.25
    argv = ["reference", "--dataset", str(data), "--loss", "ridge", "--raw",
            "--lambda", str(lam), "--tol", "1e-15"]
    assert main([*argv, "--out-dir", str(tmp_path / "r1")]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["status"] == "converged"
    x = float((tmp_path / "r1" / "x_star.txt").read_text())
    assert x == pytest.approx(1 / (1 + lam), abs=1e-7)
    assert main([*argv, "--out-dir", str(tmp_path / "r2")]) == 0
    for name in ("x_star.txt", "reference.json"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()


def test_reference_status_and_validation(tmp_path, capsys):
    base = ["reference", *RIDGE, "--out-dir", str(tmp_path)]
    assert main([*base, "--tol", "0"]) == 2
    assert main([*base, "--tol", "1e-15", "--max-iters", "2"]) == 0
    assert json.loads(capsys.readouterr().out)["status"] == "max_iters_reached"


def test_train_with_reference_file(tmp_path):
    main(["reference", *RIDGE, "--out-dir", str(tmp_path / "ref")])
    code = main(["train", *RIDGE, "--solver", "ms2gd:b=8,h=0.3,m=100", "--epochs", "3",
                 "--reference", str(tmp_path / "ref" / "reference.json"),
                 "--out-dir", str(tmp_path / "run")])
    assert code == 0
    rows = _read_csv(tmp_path / "run" / "run0_ms2gd_b8_seed0.csv")
    assert float(rows[0]["gap"]) > float(rows[-1]["gap"])


def test_missing_dataset_is_usage_error(tmp_path):
    assert main(["reference", "--dataset", str(tmp_path / "nope.svm")]) == 2
    assert main(["reference", "--out-dir", str(tmp_path)]) == 2
