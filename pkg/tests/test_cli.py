import csv
import json
import math

import numpy as np
import pytest

from prepctl import cli
from prepctl.errors import InvalidConfigurationError
from prepctl.presets import PRESET_NAMES, Preset, preset


def run_json(capsys, argv):
    code = cli.run(argv)
    out = capsys.readouterr().out
    return code, (json.loads(out) if code == 0 else None)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(v) if v else np.nan for v in r] for r in rows[1:]])
    return rows[0], data


def test_equilibria_reports_r0(tmp_path, capsys):
    code, out = run_json(capsys, ["equilibria", "--beta", "0.752", "--eta-c", "0.015",
                                  "--eta-a", "1.3", "--out", str(tmp_path)])
    assert code == 0
    assert out["r0"] == pytest.approx(4.0983, abs=1e-3)
    assert out["endemic"]["exists"]
    assert json.loads((tmp_path / "cape-verde-015-equilibria.json").read_text()) == out


def test_equilibria_without_endemic_state(tmp_path, capsys):
    code, out = run_json(capsys, ["equilibria", "--beta", "1e-1", "--out", str(tmp_path)])
    assert code == 0 and out["endemic"]["exists"] is False


def test_simulate_cape_verde(tmp_path, capsys):
    code, out = run_json(capsys, ["simulate", "--scenario", "cape-verde", "--step", "1e-2",
                                  "--out", str(tmp_path)])
    assert code == 0
    assert out["cases_error_percent"] <= 0.06
    header, data = read_csv(tmp_path / "cape-verde-015-trajectory.csv")
    assert header == ["t", "S", "I", "C", "A"]
    assert np.all(np.isfinite(data))
    header, data = read_csv(tmp_path / "cape-verde-015-yearly.csv")
    assert header[0] == "year" and data.shape == (28, 5)
    assert np.all(np.isfinite(data))


def test_simulate_sicae_with_env_step(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(cli.STEP_ENV, "0.05")
    code, out = run_json(capsys, ["simulate", "--scenario", "sicae-baseline", "--out", str(tmp_path)])
    assert code == 0 and out["step"] == 0.05
    header, _ = read_csv(tmp_path / "sicae-baseline-trajectory.csv")
    assert header == ["t", "S", "I", "C", "A", "E"]


def test_stability(tmp_path, capsys):
    code, out = run_json(capsys, ["stability", "--out", str(tmp_path)])
    assert code == 0
    assert out["dfe"]["status"] == "unstable"
    assert abs(out["beta_spectral_threshold"] - out["beta_threshold_from_r0"]) < 1e-6


def test_ocp_constrained(tmp_path, capsys):
    code, out = run_json(capsys, ["ocp", "--vartheta", "2000", "--out", str(tmp_path)])
    assert code == 0 and out["converged"]
    assert out["prep_person_time"] == pytest.approx(12553, rel=0.05)
    header, data = read_csv(tmp_path / "ocp-baseline-ocp.csv")
    assert header == ["t", "u", "S", "I", "C", "A", "E", "l1", "l2", "l3", "l4", "l5", "nu"]
    assert np.all(np.isfinite(data))


def test_sweep_runs_concurrently(tmp_path, capsys):
    code, out = run_json(capsys, ["sweep", "--param", "vartheta", "--values", "2000,inf",
                                  "--tf", "5", "--step", "0.05", "--out", str(tmp_path)])
    assert code == 0
    assert [r["value"] for r in out["runs"]] == [2000.0, None]
    assert (tmp_path / "ocp-baseline-varthetainf-ocp.csv").exists()


def test_conjecture_probe(tmp_path, capsys):
    code, out = run_json(capsys, ["conjecture-probe", "--samples", "2", "--tf", "10",
                                  "--step", "0.1", "--out", str(tmp_path)])
    assert code == 0 and out["label"] == "conjecture probe"


def test_config_file_overridden_by_flags(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"beta": 0.695, "eta-c": 0.04, "eta-a": 1.35,
                               "out": str(tmp_path / "o")}))
    code, out = run_json(capsys, ["equilibria", "--config", str(cfg)])
    assert code == 0 and out["r0"] == pytest.approx(4.5304, abs=1e-3)
    assert (tmp_path / "o" / "cape-verde-015-equilibria.json").exists()
    code, out = run_json(capsys, ["equilibria", "--config", str(cfg), "--beta", "0.752",
                                  "--eta-c", "0.015", "--eta-a", "1.3"])
    assert out["r0"] == pytest.approx(4.0983, abs=1e-3)


def test_presets_round_trip_through_cli(tmp_path, capsys):
    code, _ = run_json(capsys, ["presets", "--out", str(tmp_path)])
    assert code == 0
    for name in PRESET_NAMES:
        data = json.loads((tmp_path / f"{name}-preset.json").read_text())
        assert Preset.from_dict(data) == preset(name)
    code, out = run_json(capsys, ["equilibria", "--preset-file",
                                  str(tmp_path / "cape-verde-040-preset.json"), "--out", str(tmp_path)])
    assert out["r0"] == pytest.approx(4.5304, abs=1e-3)


@pytest.mark.parametrize("argv", [
    ["equilibria", "--bogus"],
    ["equilibria", "--scenario", "nowhere"],
    ["equilibria", "--beta", "-1"],
    ["equilibria", "--beta", "abc"],
    ["ocp", "--vartheta", "0"],
    [],
])
def test_usage_errors_exit_2(argv, tmp_path, capsys):
    assert cli.run(argv + (["--out", str(tmp_path)] if argv else [])) == 2


def test_unknown_config_key_exit_2(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"gamma": 1}')
    assert cli.run(["equilibria", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_bad_step_env_exit_2(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.STEP_ENV, "fast")
    assert cli.run(["simulate", "--out", str(tmp_path)]) == 2


def test_numerical_failure_exit_1(tmp_path, capsys):
    code = cli.run(["simulate", "--step", "5", "--tf", "25", "--beta", "50", "--out", str(tmp_path)])
    assert code == 1
    assert "DivergenceError" in capsys.readouterr().err


def test_calibrate_bad_dataset_exit_1(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("year,cases,population\n1987,61,323972\n1988,50,330000\n")
    assert cli.run(["calibrate", "--data", str(bad), "--out", str(tmp_path)]) != 0


def test_presets_module():
    pr = preset("cape-verde-015")
    assert (pr.params.beta, pr.params.eta_C, pr.params.eta_A) == (0.752, 0.015, 1.3)
    assert pr.params.Lambda == 13045 and pr.params.d == 1 and pr.params.mu == 1 / 69.54
    sb = preset("sicae-baseline")
    assert sb.initials[:2] == (10000.0, 200.0)
    assert (sb.params.psi, sb.params.theta, sb.params.beta) == (0.1, 0.001, 0.582)
    ob = preset("ocp-baseline")
    assert ob.extras["vartheta"] == 2000.0
    assert Preset.from_dict(ob.to_dict()) == ob
    inf = Preset("x", ob.params, ob.initials, 25.0, extras={"vartheta": math.inf})
    assert Preset.from_dict(json.loads(json.dumps(inf.to_dict()))) == inf
    with pytest.raises(InvalidConfigurationError):
        preset("unknown")
