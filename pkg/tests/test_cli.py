import json

import numpy as np
import pytest

from satflow.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, jko_compare, main, matched_dt, oracle_table, with_resolution
from satflow.scenarios import builtin


def small_config(tmp_path, **stepping):
    cfg = with_resolution(builtin("wall-1d-b"), 40)
    cfg.stepping.t_end = 0.3
    for k, v in stepping.items():
        setattr(cfg.stepping, k, v)
    p = tmp_path / "cfg.json"
    p.write_text(cfg.to_json())
    return p


def test_scenarios_list_and_emit(capsys):
    assert main(["scenarios", "list"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "corridor" in out and "300x300 (desk 150x150)" in out
    assert main(["scenarios", "emit", "ks-q50", "--desk"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["grid"]["nx"] == 64
    assert main(["scenarios", "emit"]) == EXIT_CONFIG


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", str(small_config(tmp_path)), "--out", str(out)]) == EXIT_OK
    assert (out / "config.json").exists() and (out / "diag.csv").exists()
    assert any(p.suffix == ".pgm" for p in out.iterdir())
    assert "steps" in capsys.readouterr().out


def test_run_builtin_with_resolution(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "wall-1d-a", "--resolution", "30", "--out", str(out)]) == EXIT_OK
    assert json.loads((out / "config.json").read_text())["grid"]["nx"] == 30


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["run", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text('{"grid": {"nx": 1}}')
    assert main(["run", str(bad)]) == EXIT_CONFIG
    assert "grid.nx" in capsys.readouterr().err
    assert main(["run", "wall-1d-a", "--resolution", "3,4,5"]) == EXIT_CONFIG


def test_numerical_errors_exit_3(tmp_path, capsys):
    p = small_config(tmp_path, solver="cg", solver_tol=1e-300)
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == EXIT_NUMERICAL
    assert "numerical error" in capsys.readouterr().err


def test_oracle_table_converges():
    rows = oracle_table(builtin("wall-1d-b"), [50, 100], 0.2)
    assert rows[1]["l1"] < rows[0]["l1"]
    assert rows[1]["order"] > 0.4


def test_oracle1d_command(tmp_path, capsys):
    js = tmp_path / "t.json"
    assert main(["oracle1d", "wall-1d-b", "--resolutions", "50,100", "--json", str(js)]) == EXIT_OK
    assert len(json.loads(js.read_text())) == 2
    assert main(["oracle1d", "ks-q50", "--desk"]) == EXIT_CONFIG


def test_matched_dt_is_first_cfl_step():
    cfg = with_resolution(builtin("wall-1d-b"), 32)
    # |U| = 1 and |w| = 1 inside the block
    assert matched_dt(cfg) == pytest.approx(0.45 / 32 / 2)


def test_jko_compare_shapes():
    out = jko_compare(builtin("wall-1d-b"), steps=2, tau=1 / 16, n=16)
    assert len(out["jko"]) == len(out["fv"]) == len(out["gaps"]) == 3
    assert out["gaps"][0] == 0.0
    assert all(f <= f0 for f0, f in out["objectives"])


def test_jko_command(tmp_path, capsys):
    assert main(["jko", "wall-1d-b", "--n", "16", "--steps", "1", "--tau", "0.0625", "--out", str(tmp_path)]) == EXIT_OK
    assert np.loadtxt(tmp_path / "jko.csv", delimiter=",").shape == (2, 16)
    assert main(["jko", "corridor", "--n", "16"]) == EXIT_CONFIG


def test_sweep(tmp_path, capsys):
    cfg = with_resolution(builtin("ks-q50"), 12)
    cfg.stepping.t_end = 0.5
    p = tmp_path / "ks.json"
    p.write_text(cfg.to_json())
    assert main(["sweep", str(p), "--seeds", "3", "4", "--jobs", "2", "--out", str(tmp_path / "s")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "seed 3" in out and "seed 4" in out
    assert (tmp_path / "s" / "seed_4" / "diag.csv").exists()


def test_invalid_q_names_the_field(tmp_path, capsys):
    cfg = json.loads(builtin("ks-q50", desk=True).to_json())
    cfg["initial"]["q"] = 1.5
    p = tmp_path / "q.json"
    p.write_text(json.dumps(cfg))
    assert main(["run", str(p)]) == EXIT_CONFIG
    assert "initial.q" in capsys.readouterr().err


@pytest.mark.parametrize("name", ["wall-1d-a", "corridor", "ks-q10"])
def test_emit_reparses_identically(name, capsys):
    from satflow.config import ScenarioConfig

    assert main(["scenarios", "emit", name]) == EXIT_OK
    parsed = ScenarioConfig.from_json(capsys.readouterr().out)
    assert parsed.to_dict() == builtin(name).to_dict()
