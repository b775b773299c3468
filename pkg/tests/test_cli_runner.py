import csv
import os
import subprocess
import sys

import numpy as np
import pytest

from landauer_cm.cli import main
from landauer_cm.config import parse_config
from landauer_cm.errors import ConfigError
from landauer_cm.runner import (continuous_grid, count_oscillations, equilibration_time,
                                run_scenario, run_sweep)
from landauer_cm.scenario import build_setup

SHORT = "time.t_max = 1\ntime.dt = 0.001\n"


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_cli_success_writes_outputs(tmp_path, capsys):
    cfg = _write(tmp_path, "preset = fig1c\n" + SHORT)
    assert main([cfg, "--out", str(tmp_path / "out")]) == 0
    run_dir = capsys.readouterr().out.strip()
    assert run_dir == str(tmp_path / "out" / "fig1c")
    assert sorted(os.listdir(run_dir)) == ["bounds.csv", "manifest.txt", "series.csv"]
    header, data = _read_csv(os.path.join(run_dir, "series.csv"))
    for col in ("t", "E", "Q_rate", "S_rate", "residual", "residual_A", "I_AB", "dist_eq"):
        assert col in header
    assert data[-1, 0] == pytest.approx(1.0)
    raw = open(os.path.join(run_dir, "series.csv"), "rb").read()
    assert b"\r" not in raw
    manifest = open(os.path.join(run_dir, "manifest.txt")).read()
    assert "config.scenario = cascade" in manifest
    assert "derived.bath_label = thermal bath" in manifest
    assert "backend = " in manifest
    with open(os.path.join(run_dir, "bounds.csv"), newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["series", "t_start", "t_end", "min_residual"]
    assert [r[0] for r in rows[1:]] == ["B"]  # only B violates in the cascade


def test_cli_config_errors(tmp_path, capsys):
    assert main([_write(tmp_path, "preset = fig1b\nbogus = 1\n")]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main([str(tmp_path / "missing.cfg")]) == 2
    assert main([_write(tmp_path, "time.dt = 0.3\n", "dt.cfg"), "--preset", "fig1b"]) == 2


def test_cli_numerical_failure(tmp_path, capsys):
    cfg = _write(tmp_path, "time.dt = 1\ntime.t_max = 50\n")
    assert main([cfg, "--preset", "fig1b", "--out", str(tmp_path)]) == 3
    assert "negative eigenvalue" in capsys.readouterr().err


def test_cli_truncation(tmp_path, capsys):
    text = "fock.dim = 4\ntime.t_max = 10\ntime.dt = 0.01\n"
    out = str(tmp_path / "o")
    assert main([_write(tmp_path, text + "fock.strict = true\n"), "--preset", "fig2e",
                 "--out", out]) == 4
    assert "fock.dim" in capsys.readouterr().err
    assert main([_write(tmp_path, text, "lax.cfg"), "--preset", "fig2e", "--out", out]) == 0
    captured = capsys.readouterr()
    assert "warning" in captured.err
    manifest = open(os.path.join(captured.out.strip(), "manifest.txt")).read()
    assert "truncation warning" in manifest


def test_console_script_entry_point(tmp_path):
    cfg = _write(tmp_path, "preset = fig1b\n" + SHORT)
    out = subprocess.run([sys.executable, "-m", "landauer_cm.cli", cfg, "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert os.path.isfile(os.path.join(out.stdout.strip(), "series.csv"))


def test_outputs_are_byte_identical_across_runs(tmp_path):
    cfg = parse_config("mode = both\ncoupling.g = 10\ncoupling.tau = 0.01\n" + SHORT,
                       preset="fig1c")
    a = run_scenario(cfg, str(tmp_path / "a")).run_dir
    b = run_scenario(cfg, str(tmp_path / "b")).run_dir
    names = sorted(os.listdir(a))
    assert names == ["bounds.csv", "deviation.csv", "manifest.txt", "series.csv",
                     "series_discrete.csv"]
    for name in names:
        assert open(os.path.join(a, name), "rb").read() == open(os.path.join(b, name), "rb").read()


def test_both_mode_deviation_is_first_order_in_tau():
    devs = []
    for g, tau in ((10.0, 0.01), (20.0, 0.0025)):
        cfg = parse_config(f"mode = both\ncoupling.g = {g}\ncoupling.tau = {tau}\n" + SHORT,
                           preset="fig1b")
        devs.append(float(np.max(run_scenario(cfg, write=False).deviation["trace_distance"])))
    assert devs[0] / devs[1] == pytest.approx(4.0, rel=0.15)


def test_inverted_bath_manifest(tmp_path):
    res = run_scenario(parse_config(SHORT, preset="fig1b_inset"), str(tmp_path))
    assert "inverted bath" in open(os.path.join(res.run_dir, "manifest.txt")).read()
    final = res.trajectory.states[-1]
    assert final[0, 0].real > 0.5  # population pumped into the excited level


def test_grid_rules():
    cfg = parse_config("time.t_max = 1\n", preset="fig1b")
    dt, n, every = continuous_grid(cfg, build_setup(cfg))
    assert n * dt == pytest.approx(1.0) and n % every == 0 and n // every <= 2000
    with pytest.raises(ConfigError):
        bad = parse_config("time.dt = 0.001\ntime.save_every = 7\n", preset="fig1b")
        continuous_grid(bad, build_setup(bad))
    with pytest.raises(ConfigError):
        run_scenario(parse_config("", preset="fig_supp1"), write=False)


def test_sweep_summary_and_parallel_agree(tmp_path):
    text = "sweep.values = 1, 2, 3\ntime.t_max = 2\ntime.dt = 0.001\n"
    cfg = parse_config(text, preset="fig_supp1")
    serial = run_sweep(cfg, str(tmp_path / "s"), workers=1)
    parallel = run_sweep(cfg, str(tmp_path / "p"), workers=2)
    for key in serial.summary:
        assert np.array_equal(serial.summary[key], parallel.summary[key])
    header, data = _read_csv(os.path.join(serial.run_dir, "summary.csv"))
    assert header[0] == "value" and data.shape == (3, len(header))
    assert sorted(os.listdir(serial.run_dir)) == ["N_1", "N_2", "N_3", "summary.csv"]


def test_analysis_helpers():
    t = np.arange(6.0)
    assert equilibration_time(t, [1, 0.5, 0.005, 0.02, 0.001, 0.0]) == 4.0
    assert equilibration_time(t, [1, 1, 1, 1, 1, 1]) == float("inf")
    assert count_oscillations(np.sin(np.linspace(0, 6 * np.pi, 600))) == 6
    assert count_oscillations(np.linspace(0, 1, 10)) == 0
