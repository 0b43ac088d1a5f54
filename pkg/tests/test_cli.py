import csv
import json
import math

import pytest

from lossprotect.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, PRESETS, main
from lossprotect.dynamics import TRAJECTORY_HEADER


def run_json(capsys, argv):
    assert main(argv) == EXIT_OK
    return json.loads(capsys.readouterr().out)


def test_markovian_fig1(capsys):
    r = run_json(capsys, ["markovian", "--preset", "fig1"])
    assert r["Omega_EP"] == pytest.approx(7.0686e-3, rel=1e-4)
    assert r["phase"] == "broken"
    assert r["gamma"] == pytest.approx(math.pi * 9e-6 / 2e-3)


def test_markovian_hermitian_limit(capsys):
    r = run_json(capsys, ["markovian", "--gamma", "0", "--Omega", "0.004"])
    imag = sorted([r["lambda_plus"][1], r["lambda_minus"][1]])
    assert imag == pytest.approx([-1.004, -0.996])
    assert r["lambda_plus"][0] == r["lambda_minus"][0] == 0.0


def test_markovian_decoupled(capsys):
    r = run_json(capsys, ["markovian", "--gamma", "0.01", "--Omega", "0"])
    assert r["decoupled"] is True


def test_markovian_missing_inputs(capsys):
    assert main(["markovian", "--Omega", "0.001"]) == EXIT_USAGE


def test_boundaries(capsys):
    r = run_json(capsys, ["boundaries", "--g", "0.004", "--Omega", "0.0005", "--delta-omega", "0.002"])
    assert r["analytic_verdict"] == "OneProtected"
    assert r["above_ep"] is False


def test_memory_subcommand(capsys, tmp_path):
    r = run_json(capsys, ["memory", "--preset", "fig2", "--init", "a1", "--n-samples", "1024", "--out", str(tmp_path)])
    assert 0.3 < r["M"] <= 1
    assert r["n_samples"] == 1024
    assert json.loads((tmp_path / "memory.json").read_text())["M"] == r["M"]


def test_memory_custom_state(capsys, tmp_path):
    amps = [[0.0, 0.0]] * 12
    amps[0] = [0.6, 0.0]
    amps[1] = [0.0, 0.8]
    f = tmp_path / "psi.json"
    f.write_text(json.dumps(amps))
    r = run_json(capsys, ["memory", "--delta-omega", "0.002", "--g", "0", "--Omega", "0", "--n-modes", "10", "--init", str(f)])
    assert r["M"] == pytest.approx(1.0, abs=1e-9)
    f.write_text(json.dumps(amps[:5]))
    assert main(["memory", "--delta-omega", "0.002", "--g", "0", "--Omega", "0", "--n-modes", "10", "--init", str(f)]) == EXIT_USAGE


def test_simulate_fig2(tmp_path):
    assert main(["simulate", "--preset", "fig2", "--n-times", "201", "--out", str(tmp_path)]) == EXIT_OK
    rows = list(csv.reader(open(tmp_path / "trajectory.csv")))
    assert tuple(rows[0]) == TRAJECTORY_HEADER
    assert len(rows) == 202
    assert (tmp_path / "markovian.csv").exists()
    script = (tmp_path / "simulate.gp").read_text()
    assert "TR = " in script and "set arrow" in script
    meta = json.loads((tmp_path / "simulate.json").read_text())
    for k, v in PRESETS["fig2"].items():
        assert meta["params"][k] == v
    assert meta["max_norm_drift"] < 1e-10


def test_simulate_presets_echo_caption():
    assert PRESETS["fig1"] == {"n_modes": 100, "delta_omega": 2e-3, "g": 3e-3, "Omega": 6e-3}
    assert PRESETS["fig2"] == {"n_modes": 100, "delta_omega": 2e-3, "g": 7.5e-4, "Omega": 5e-4}
    assert PRESETS["fig3"] == {"n_modes": 50, "delta_omega": 2e-3}


@pytest.mark.parametrize("argv", [["--n-times", "0"], ["--t-end", "0", "--n-times", "5"]])
def test_simulate_empty_time_grid(argv, tmp_path):
    assert main(["simulate", "--preset", "fig1", "--out", str(tmp_path)] + argv) == EXIT_USAGE


def test_usage_errors(tmp_path):
    assert main([]) == EXIT_USAGE
    assert main(["simulate", "--bogus"]) == EXIT_USAGE
    assert main(["simulate", "--g", "0.001"]) == EXIT_USAGE
    assert main(["simulate", "--preset", "fig1", "--convention", "diagonal"]) == EXIT_USAGE


def test_config_file_strict(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"delta_omega": 2e-3, "g": 1e-3, "Omega": 1e-3, "n_modes": 10, "detla_omega": 1}))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_USAGE
    cfg.write_text(json.dumps({"delta_omega": 2e-3, "g": 1e-3, "Omega": 1e-3, "n_modes": 10, "n_times": 11}))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_OK
    assert len((tmp_path / "trajectory.csv").read_text().splitlines()) == 12


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"gamma": 0.02, "Omega": 0.001}))
    r = run_json(capsys, ["markovian", "--config", str(cfg), "--Omega", "0.03"])
    assert r["Omega"] == 0.03 and r["phase"] == "symmetric"


def test_sweep_single_cell(tmp_path):
    argv = ["sweep", "--preset", "fig3", "--g-range", "1", "1", "1", "--Omega-range", "0.5", "0.5", "1",
            "--n-samples", "256", "--threads", "1", "--out", str(tmp_path)]
    assert main(argv) == EXIT_OK
    rows = list(csv.reader(open(tmp_path / "diagram.csv")))
    assert len(rows) == 2
    meta = json.loads((tmp_path / "diagram.json").read_text())
    assert meta["n_modes"] == 50 and meta["delta_omega"] == 2e-3
    assert meta["preset_params"] == PRESETS["fig3"]
    for name in ("diagram.csv", "diagram.json", "sweep.gp", "verdict.dat", "analytic_verdict.dat", "M_state1.dat"):
        assert (tmp_path / name).exists()


def test_sweep_fig4_analytic(tmp_path):
    assert main(["sweep", "--preset", "fig4-analytic", "--out", str(tmp_path)]) == EXIT_OK
    rows = list(csv.reader(open(tmp_path / "diagram.csv")))
    assert len(rows) == 401
    assert {r[5] for r in rows[1:]} == {"TwoProtected", "OneProtected", "ZeroProtected"}
    assert not (tmp_path / "verdict.dat").exists()


def test_sweep_small_deterministic(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        argv = ["sweep", "--preset", "fig3", "--g-range", "0.2", "2", "3", "--Omega-range", "0.2", "2", "3",
                "--n-samples", "256", "--threads", "1", "--out", str(d)]
        assert main(argv) == EXIT_OK
        outs.append(((d / "diagram.csv").read_bytes(), (d / "diagram.json").read_bytes()))
    assert outs[0] == outs[1]


def test_sweep_too_many_invalid(tmp_path, monkeypatch):
    import lossprotect.phase as ph

    def boom(*a, **k):
        raise RuntimeError("nope")

    monkeypatch.setattr(ph, "numeric_classification", boom)
    argv = ["sweep", "--preset", "fig3", "--g-range", "1", "2", "2", "--Omega-range", "1", "1", "1",
            "--threads", "1", "--out", str(tmp_path)]
    assert main(argv) == EXIT_RUNTIME
    assert "invalid" in (tmp_path / "diagram.csv").read_text()
