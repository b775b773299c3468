"""Compare the numba (sparse) and numpy (dense) RK4 kernels on the package's generators.

    python3 benchmarks/bench_rk4.py [--steps N] [--repeat R]

Each case integrates the same generator with both backends, checks that the
final states agree, and prints the best wall time of R repeats.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from landauer_cm import _kernels
from landauer_cm.config import parse_config
from landauer_cm.scenario import build_setup

CASES = {
    "single qubit (d=2)": "",
    "cascade N=2 (d=4)": "",
    "cascade N=4 (d=16)": "system.n_qubits = 4\nstate.initial = all_up\n",
    "qubit-oscillator, 20 levels (d=40)": "",
    "qubit-oscillator, 40 levels (d=80)": "",
}
PRESET = {
    "single qubit (d=2)": "fig1b",
    "cascade N=2 (d=4)": "fig1c",
    "cascade N=4 (d=16)": "fig1c",
    "qubit-oscillator, 20 levels (d=40)": "fig2d",
    "qubit-oscillator, 40 levels (d=80)": "fig2e",
}


def best_time(fn, repeat: int) -> tuple[float, np.ndarray]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not _kernels.HAVE_NUMBA:
        raise SystemExit(f"numba unavailable (or disabled via {_kernels.ENV_FLAG})")

    print(f"{'case':38s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s} {'max diff':>9s}")
    for name, extra in CASES.items():
        setup = build_setup(parse_config(extra, preset=PRESET[name]))
        M, X, Y = setup.generator.sandwich_form()
        rho0 = setup.rho0.mat
        dt = 1e-3

        def run(flag):
            return lambda: _kernels.rk4_integrate(M, X, Y, rho0, dt, args.steps,
                                                  args.steps, use_numba=flag)

        run(True)()  # compile outside the timing
        t_np, out_np = best_time(run(False), args.repeat)
        t_nb, out_nb = best_time(run(True), args.repeat)
        diff = float(np.abs(out_np[-1] - out_nb[-1]).max())
        print(f"{name:38s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f} {diff:9.1e}")


if __name__ == "__main__":
    main()
