import json
import os

import numpy as np

from plemelj.cli import DEFAULT_CONFIG, main


def run_cli(tmp_path, *args):
    out = str(tmp_path / "out")
    rc = main(list(args) + ["--out", out])
    return rc, out


def test_mesh_command(tmp_path, capsys):
    rc, out = run_cli(tmp_path, "--command", "mesh", "--geometry", "circle", "--N", "64")
    assert rc == 0
    assert os.path.exists(os.path.join(out, "mesh.json"))
    captured = capsys.readouterr()
    assert "passed" in captured.out


def test_mesh_validation_failure_exit_code(tmp_path, capsys):
    rc, _ = run_cli(tmp_path, "--command", "mesh", "--geometry", "deformed",
                    "--eps", "0.9", "--N", "64")
    assert rc == 2


def test_verify_single_N(tmp_path):
    rc, out = run_cli(tmp_path, "--command", "verify", "--N", "64")
    assert rc == 0
    doc = json.load(open(os.path.join(out, "verify.json")))
    assert doc["pass"]
    assert all(row["residual_N"] <= 1e-3 for row in doc["results"])


def test_verify_sweep(tmp_path):
    rc, out = run_cli(tmp_path, "--command", "verify", "--N", "64,128")
    assert rc == 0
    doc = json.load(open(os.path.join(out, "verify.json")))
    Ns = {row["N"] for row in doc["results"]}
    assert Ns == {64, 128}


def test_decompose_constant(tmp_path):
    rc, out = run_cli(tmp_path, "--command", "decompose", "--N", "64")
    assert rc == 0
    rows = open(os.path.join(out, "decompose.csv")).read().strip().splitlines()
    assert rows[0] == "node,f,f_plus,f_minus"
    f_plus = np.array([float(r.split(",")[2]) for r in rows[1:]])
    assert np.abs(f_plus - 1.0).max() < 1e-6


def test_limits_row_count(tmp_path):
    rc, out = run_cli(tmp_path, "--command", "limits", "--N", "64")
    assert rc == 0
    rows = open(os.path.join(out, "limits_interior.csv")).read().strip().splitlines()
    assert len(rows) == 1 + DEFAULT_CONFIG["depth"]


def test_szego_report(tmp_path):
    rc, out = run_cli(tmp_path, "--command", "szego", "--N", "64")
    assert rc == 0
    doc = json.load(open(os.path.join(out, "szego.json")))
    assert doc["condition_estimate"] <= 100
    assert doc["idempotence_residual"] < 1e-6


def test_maximal_report(tmp_path):
    rc, out = run_cli(tmp_path, "--command", "maximal", "--N", "64")
    assert rc == 0
    doc = json.load(open(os.path.join(out, "maximal.json")))
    assert doc["cotlar_finite"]
    rows = open(os.path.join(out, "maximal.csv")).read().strip().splitlines()
    assert rows[0] == "node,M,N,cotlar_ratio"
    assert len(rows) == 65


def test_mobius_report(tmp_path):
    rc, out = run_cli(tmp_path, "--command", "mobius", "--N", "64")
    assert rc == 0
    doc = json.load(open(os.path.join(out, "mobius.json")))
    checks = {c["check"]: c for c in doc["checks"]}
    assert checks["kernel_intertwining"]["operative_reading"] is not None
    assert checks["isometry"]["gap_refined"] < checks["isometry"]["gap"]


def test_converge_orders(tmp_path):
    rc, out = run_cli(tmp_path, "--command", "converge", "--N", "64,128")
    assert rc == 0
    doc = json.load(open(os.path.join(out, "converge.json")))
    orders = doc["fitted_order"]
    assert orders["C^2 - I/4"] == "exact"
    assert isinstance(orders["isometry_gap"], float) and orders["isometry_gap"] >= 1.5


def test_determinism_byte_identical(tmp_path):
    out1 = str(tmp_path / "a")
    out2 = str(tmp_path / "b")
    for out in (out1, out2):
        assert main(["--command", "maximal", "--N", "64", "--seed", "3", "--out", out]) == 0
    for name in ("maximal.json", "maximal.csv"):
        with open(os.path.join(out1, name), "rb") as f1, open(os.path.join(out2, name), "rb") as f2:
            assert f1.read() == f2.read()


def test_config_file_and_round_trip(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg = dict(DEFAULT_CONFIG)
    cfg.update({"command": "verify", "N": 64})
    cfg_path.write_text(json.dumps(cfg))
    rc = main(["--config", str(cfg_path), "--out", str(tmp_path / "o")])
    assert rc == 0
    # round trip unchanged
    assert json.loads(json.dumps(cfg)) == cfg


def test_config_defaults_complete():
    for field in ("command", "n", "geometry", "N", "eps", "mode", "seed", "out"):
        assert field in DEFAULT_CONFIG
