import os
import subprocess
import sys

import numpy as np
import pytest

from landauer_cm import _kernels
from landauer_cm.hilbert import random_density_matrix, random_hermitian
from landauer_cm.lindblad import generator_indirect
from landauer_cm.models import BathSpec, CouplingSpec, FockSpace

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba backend disabled")


def _random_generator(d, m, rng):
    M = random_hermitian(d, rng) * -1j + 0.1 * (rng.normal(size=(d, d)))
    X = rng.normal(size=(m, d, d)) + 1j * rng.normal(size=(m, d, d))
    Y = rng.normal(size=(m, d, d)) + 1j * rng.normal(size=(m, d, d))
    return M, X, Y


def test_pack_csr_roundtrip():
    rng = np.random.default_rng(0)
    mats = [np.where(rng.random((5, 5)) < 0.3, rng.normal(size=(5, 5)), 0) for _ in range(3)]
    data, cols, rowptr = _kernels.pack_csr(mats)
    for k, m in enumerate(mats):
        rebuilt = np.zeros((5, 5), dtype=complex)
        base = k * 6
        for i in range(5):
            for p in range(rowptr[base + i], rowptr[base + i + 1]):
                rebuilt[i, cols[p]] = data[p]
        assert np.array_equal(rebuilt, m)


@needs_numba
@pytest.mark.parametrize("d,m", [(2, 1), (4, 3), (7, 5)])
def test_backends_agree_on_rhs(d, m):
    rng = np.random.default_rng(d)
    M, X, Y = _random_generator(d, m, rng)
    rho = random_density_matrix((d,), rng).mat
    a = _kernels.rhs(M, X, Y, rho, use_numba=True)
    b = _kernels.rhs(M, X, Y, rho, use_numba=False)
    assert np.allclose(a, b, atol=1e-12)
    stack = np.array([rho, rho.T])
    assert np.allclose(_kernels.rhs_many(M, X, Y, stack, use_numba=True),
                       _kernels.rhs_many(M, X, Y, stack, use_numba=False), atol=1e-12)


@needs_numba
def test_backends_agree_on_rk4():
    gen = generator_indirect("oscillator", BathSpec(0.5), CouplingSpec(J=0.2, gamma_g=0.1),
                             FockSpace(10))
    M, X, Y = gen.sandwich_form()
    rho0 = np.zeros((20, 20), dtype=complex)
    rho0[0, 0] = 1
    a = _kernels.rk4_integrate(M, X, Y, rho0, 0.01, 400, 40, use_numba=True)
    b = _kernels.rk4_integrate(M, X, Y, rho0, 0.01, 400, 40, use_numba=False)
    assert a.shape == (11, 20, 20)
    assert np.abs(a - b).max() < 1e-13


def test_save_every_must_divide():
    M, X, Y = _random_generator(2, 1, np.random.default_rng(1))
    with pytest.raises(ValueError):
        _kernels.rk4_integrate(M, X, Y, np.eye(2) / 2, 0.1, 10, 3)


def test_no_terms_generator():
    M = -1j * np.diag([1.0, -1.0]).astype(complex)
    X = np.zeros((0, 2, 2), dtype=complex)
    rho = np.full((2, 2), 0.5, dtype=complex)
    out = _kernels.rk4_integrate(M, X, X, rho, 0.01, 100, 100)[-1]
    assert out[0, 1] == pytest.approx(0.5 * np.exp(-2j), abs=1e-8)  # RK4 phase error ~1e-9


def test_env_flag_selects_numpy():
    env = dict(os.environ, LANDAUER_CM_NO_NUMBA="1")
    code = "from landauer_cm import _kernels; print(_kernels.backend_name())"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env["LANDAUER_CM_NO_NUMBA"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True)
    assert out.stdout.strip() in ("numba", "numpy")


ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


@needs_numba
def test_full_run_identical_across_backends(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("preset = fig2d\nfock.dim = 8\ntime.t_max = 5\ntime.dt = 0.01\n")
    series = {}
    for flag in ("0", "1"):
        env = dict(os.environ, LANDAUER_CM_NO_NUMBA=flag)
        out = subprocess.run([sys.executable, "-m", "landauer_cm.cli", str(cfg), "--out",
                              str(tmp_path / flag)], env=env, capture_output=True, text=True)
        assert out.returncode == 0, out.stderr
        run_dir = out.stdout.strip()
        series[flag] = np.loadtxt(os.path.join(run_dir, "series.csv"), delimiter=",",
                                  skiprows=1)
        manifest = open(os.path.join(run_dir, "manifest.txt")).read()
        assert f"backend = {'numpy' if flag == '1' else 'numba'}" in manifest
    assert np.allclose(series["0"], series["1"], rtol=1e-9, atol=1e-12)


@needs_numba
def test_benchmark_script_runs():
    out = subprocess.run([sys.executable, os.path.join(ROOT, "benchmarks", "bench_rk4.py"),
                          "--steps", "20", "--repeat", "1"], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert "speedup" in out.stdout
