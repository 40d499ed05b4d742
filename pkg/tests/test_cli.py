import json

import pytest

from freefront.cli import run, trajectory_from_dict

RUN_TOML = """
alpha = 0.4
[nonlinearity]
kind = "logistic"
[initial]
shape = "cosine"
sigma = {sigma}
[solver]
t_horizon = {horizon}
"""


def _cfg(tmp_path, name="run.toml", sigma=1.0, horizon=50):
    p = tmp_path / name
    p.write_text(RUN_TOML.format(sigma=sigma, horizon=horizon))
    return str(p)


def test_simulate_and_classify(tmp_path):
    out = tmp_path / "out"
    assert run(["--out", str(out), "simulate", "--config", _cfg(tmp_path)]) == 0
    payload = json.loads((out / "trajectory.json").read_text())
    assert payload["config"]["alpha"] == 0.4
    assert payload["outcome"]["verdict"] == "vanishing"
    traj = trajectory_from_dict(payload["trajectory"])
    assert traj.termination == "shrink_vanish"
    assert (out / "trajectory.csv").read_text().startswith("# config: {")
    assert run(["--out", str(out), "classify", str(out / "trajectory.json")]) == 0
    verdict = json.loads((out / "trajectory_verdict.json").read_text())
    assert verdict["outcome"]["verdict"] == "vanishing"


def test_undetermined_classification_exits_3(tmp_path):
    out = tmp_path / "out"
    assert run(["--out", str(out), "simulate", "--config", _cfg(tmp_path, sigma=3.0, horizon=1)]) == 0
    assert run(["--out", str(out), "classify", str(out / "trajectory.json")]) == 3


def test_outputs_are_deterministic(tmp_path):
    cfg = _cfg(tmp_path)
    run(["--out", str(tmp_path / "a"), "simulate", "--config", cfg])
    run(["--out", str(tmp_path / "b"), "simulate", "--config", cfg])
    for name in ("trajectory.json", "trajectory.csv", "trajectory_final.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_env_output_dir_and_json_config(tmp_path, monkeypatch):
    monkeypatch.setenv("FREEFRONT_OUT", str(tmp_path / "env"))
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"alpha": 0.3, "nonlinearity": {"kind": "bistable", "theta": 0.25}}))
    assert run(["stationary", "--config", str(cfg)]) == 0
    data = json.loads((tmp_path / "env" / "stationary.json").read_text())
    assert data["stationary"]["case"] == "unbounded"  # 0.3 > alpha0 = 0.2887
    assert run(["certify", "--config", str(cfg)]) == 0
    cert = json.loads((tmp_path / "env" / "certificate.json").read_text())
    assert cert["certified"] and cert["reason"]["name"] == "alpha_above_critical"


def test_semiwave_and_sweep(tmp_path):
    out = tmp_path / "o"
    assert run(["--out", str(out), "semiwave", "--config", _cfg(tmp_path)]) == 0
    sw = json.loads((out / "semiwave.json").read_text())
    assert sw["c_star"] == pytest.approx(0.10923, abs=1e-5) and sw["bracket_width"] <= 1e-10
    sweep = tmp_path / "s.toml"
    sweep.write_text("alpha = 0.4\n[solver]\nt_horizon = 100\nx_max = 6.0\n[sweep]\nsigma = [5.0, 0.5]\n")
    assert run(["--out", str(out), "sweep", "--config", str(sweep)]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    assert lines[1] == "sigma,alpha,verdict,T_star,width"
    assert lines[2].startswith("0.5,0.4,vanishing") and lines[3].startswith("5.0,0.4,spreading")


def test_compare(tmp_path):
    lo = _cfg(tmp_path, "lo.toml", sigma=0.5, horizon=5)
    hi = _cfg(tmp_path, "hi.toml", sigma=1.0, horizon=5)
    assert run(["--out", str(tmp_path), "compare", "--lo", lo, "--hi", hi]) == 0
    assert run(["--out", str(tmp_path), "compare", "--lo", hi, "--hi", lo]) == 1


def test_bad_inputs_exit_1(tmp_path):
    assert run(["nonsense"]) == 1
    assert run(["simulate", "--bogus"]) == 1
    bad = tmp_path / "bad.toml"
    bad.write_text("[nonlinearity]\nkind = 'mystery'\n")
    assert run(["--out", str(tmp_path), "simulate", "--config", str(bad)]) == 1
    bad.write_text("alpha = 0.4\n[solver]\nwarp = 9\n")
    assert run(["--out", str(tmp_path), "simulate", "--config", str(bad)]) == 1
    bad.write_text("alpha = 0.9\n")
    assert run(["--out", str(tmp_path), "semiwave", "--config", str(bad)]) == 1


def test_numerical_failure_exit_2(tmp_path):
    p = tmp_path / "f.toml"
    p.write_text("alpha = 0.4\n[solver]\ndt_min = 1.0\ndt_max = 0.5\n")
    assert run(["--out", str(tmp_path), "simulate", "--config", str(p)]) == 2


def test_threshold_subcommand(tmp_path, capsys):
    p = tmp_path / "thr.toml"
    p.write_text("alpha = 0.4\n[threshold]\ntol = 0.05\n")
    assert run(["--out", str(tmp_path), "threshold", "--config", str(p)]) == 0
    printed = capsys.readouterr().out
    assert "projected cost" in printed
    res = json.loads((tmp_path / "threshold.json").read_text())
    assert res["sigma_lo"] < 3.7166 < res["sigma_hi"]
    assert (tmp_path / "threshold_log.csv").exists()
