import json

import pytest

from rollout_tte.cli import main


def base_config(out):
    return {
        "design": "crd",
        "beta": 1,
        "n": 40,
        "r": 1.0,
        "budget": 0.5,
        "sweep_param": "r",
        "sweep_values": [0.0, 1.0],
        "G": 1,
        "N": 2,
        "estimators": ["pi_crd_k", "dm"],
        "master_seed": 5,
        "out": str(out),
    }


def test_gen_graph_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert main(["gen-graph", "--n", "100", "--seed", "3", "--out", str(a)]) == 0
    assert main(["gen-graph", "--n", "100", "--seed", "3", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert "resolved_config" in capsys.readouterr().out


def test_run_writes_records_and_summary(tmp_path, capsys):
    out = tmp_path / "records.csv"
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(base_config(out)))
    assert main(["run", "--config", str(cfg_path)]) == 0
    stdout = capsys.readouterr().out
    assert "resolved_config" in stdout
    assert out.exists()
    assert (tmp_path / "records.summary.csv").exists()
    header = out.read_text().splitlines()[0]
    assert header == "design,estimator,n,beta,r,budget,graph_seed,schedule_seed,tte_true,tte_est,status"


def test_run_is_byte_deterministic_across_workers(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(base_config(tmp_path / "unused.csv")))
    outs = []
    for name, workers in (("r1.csv", "1"), ("r2.csv", "1"), ("r4.csv", "4")):
        out = tmp_path / name
        assert main(["run", "--config", str(cfg_path), "--out", str(out), "--workers", workers]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_flag_overrides_config(tmp_path, capsys):
    out = tmp_path / "records.csv"
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(base_config(out)))
    assert main(["run", "--config", str(cfg_path), "--n", "25", "--seed", "9"]) == 0
    resolved = json.loads(capsys.readouterr().out.splitlines()[0])["resolved_config"]
    assert resolved["n"] == 25
    assert resolved["master_seed"] == 9
    rows = out.read_text().splitlines()[1:]
    assert all(row.split(",")[2] == "25" for row in rows)


def test_missing_config_exits_2(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    assert "missing.json" in capsys.readouterr().err


def test_invalid_config_exits_2(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    payload = base_config(tmp_path / "r.csv")
    payload["design"] = "cluster"
    cfg_path.write_text(json.dumps(payload))
    assert main(["run", "--config", str(cfg_path)]) == 2
    assert "error" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as excinfo:
        main(["gen-graph", "--n", "5", "--out", str(tmp_path / "g.txt"), "--frobnicate"])
    assert excinfo.value.code == 2


def test_sweep_expands_grid(tmp_path):
    grid = {
        "base": base_config(tmp_path / "records.csv"),
        "grid": {"beta": [1, 2], "master_seed": [1]},
    }
    grid_path = tmp_path / "grid.json"
    grid_path.write_text(json.dumps(grid))
    assert main(["sweep", "--config", str(grid_path)]) == 0
    produced = sorted(p.name for p in tmp_path.glob("records_*.csv"))
    assert produced == [
        "records_beta-1_master_seed-1.csv",
        "records_beta-1_master_seed-1.summary.csv",
        "records_beta-2_master_seed-1.csv",
        "records_beta-2_master_seed-1.summary.csv",
    ]
