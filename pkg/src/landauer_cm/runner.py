"""Run configured scenarios end to end and write CSV series, bound reports and manifests."""
from __future__ import annotations

import math
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, _kernels
from .collision import CollisionEngine, discrete_states, discrete_steps
from .config import ScenarioConfig
from .errors import ConfigError, TruncationError, TruncationWarning
from .hilbert import TOL_HERM, TOL_POS, TOL_TRACE, partial_trace_array, trace_distance
from .lindblad import Trajectory, evolve
from .scenario import Setup, build_setup, reference_state
from .thermo import (MIN_VIOLATION_POINTS, BoundReport, analyze_continuous, analyze_discrete,
                     detect_violations, violation_tolerance)

MAX_ROWS = 2000
TAIL_TOL = 1e-8
EQUILIBRIUM_FRACTION = 0.01


def _grid_divisor(n_steps: int, max_rows: int = MAX_ROWS) -> int:
    """Smallest divisor s of n_steps with n_steps / s <= max_rows."""
    s = max(1, math.ceil(n_steps / max_rows))
    while n_steps % s:
        s += 1
    return s


def continuous_grid(config: ScenarioConfig, setup: Setup) -> tuple[float, int, int]:
    """(dt, n_steps, save_every) covering the horizon exactly."""
    t_max = config.horizon
    if config.dt is None:
        dt0 = min(1e-3 / setup.gamma_eff, 1e-3 / setup.bath.omega)
        n = max(1, math.ceil(t_max / dt0 - 1e-9))
        dt = t_max / n
    else:
        dt = config.dt
        ratio = t_max / dt
        n = int(round(ratio))
        if n < 1 or not math.isclose(n, ratio, rel_tol=1e-9, abs_tol=1e-9):
            raise ConfigError(f"t_max={t_max} is not an integer multiple of dt={dt}",
                              key="time.dt", line=config.lines.get("time.dt"))
    return dt, n, _stride(config, n)


def _stride(config: ScenarioConfig, n: int) -> int:
    if config.save_every is None:
        return _grid_divisor(n)
    if n % config.save_every:
        raise ConfigError(f"save_every={config.save_every} does not divide {n} steps",
                          key="time.save_every", line=config.lines.get("time.save_every"))
    return config.save_every


def simulate_continuous(config: ScenarioConfig) -> tuple[Setup, Trajectory, dict]:
    setup = build_setup(config)
    dt, n, every = continuous_grid(config, setup)
    traj = evolve(setup.generator, setup.rho0, n * dt, dt, every, meta=setup.meta())
    return setup, traj, {"dt": dt, "n_steps": n, "save_every": every}


def equilibrium_distance(states: np.ndarray, setup: Setup) -> np.ndarray:
    """Trace distance to the fixed point: of S_A for indirect scenarios, else of the whole system."""
    ref = reference_state(setup).mat
    if setup.kind.startswith("indirect"):
        ref_a = partial_trace_array(ref, setup.dims, [0])
        return np.array([trace_distance(partial_trace_array(r, setup.dims, [0]), ref_a)
                         for r in states])
    return np.array([trace_distance(r, ref) for r in states])


def equilibration_time(times, distance, fraction: float = EQUILIBRIUM_FRACTION) -> float:
    """First time after which the distance stays below fraction * initial distance."""
    d = np.asarray(distance)
    thr = fraction * d[0]
    above = np.nonzero(d > thr)[0]
    if above.size == 0:
        return float(times[0])
    last = above[-1]
    if last + 1 >= d.size:
        return math.inf
    return float(times[last + 1])


def count_oscillations(values, rel: float = 1e-3) -> int:
    """Number of turning points, ignoring wiggles smaller than rel * range."""
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        return 0
    h = rel * (v.max() - v.min())
    if h == 0:
        return 0
    count, direction, anchor = 0, 0, v[0]
    for x in v[1:]:
        if direction >= 0 and x > anchor:
            anchor, direction = x, 1
        elif direction <= 0 and x < anchor:
            anchor, direction = x, -1
        elif direction == 1 and x < anchor - h:
            count += 1
            anchor, direction = x, -1
        elif direction == -1 and x > anchor + h:
            count += 1
            anchor, direction = x, 1
    return count


def residual_series(cols: dict, setup: Setup) -> dict:
    out = {"total": cols["residual"]}
    if setup.n_sites >= 2:
        for label in setup.labels:
            out[label] = cols[f"residual_{label}"]
    return out


def write_csv(path: str, cols: dict) -> None:
    names = list(cols)
    data = np.column_stack([np.asarray(cols[k], dtype=float) for k in names])
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(names) + "\n")
        for row in data:
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def write_bounds(path: str, report: BoundReport) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("series,t_start,t_end,min_residual\n")
        for name, t0, t1, m in report.rows():
            fh.write(f"{name},{t0:.17g},{t1:.17g},{m:.17g}\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return "" if v is None else str(v)


def write_manifest(path: str, items: list[tuple[str, object]]) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        for k, v in items:
            fh.write(f"{k} = {_fmt(v)}\n")


@dataclass
class RunResult:
    run_dir: str | None
    setup: Setup
    series: dict
    report: BoundReport
    grid: dict
    trajectory: Trajectory | None = None
    discrete_series: dict | None = None
    deviation: dict | None = None
    notes: list = field(default_factory=list)


def _check_truncation(cols: dict, config: ScenarioConfig, notes: list) -> None:
    if "fock_tail" not in cols:
        return
    worst = float(np.max(cols["fock_tail"]))
    if worst > TAIL_TOL:
        msg = (f"top two Fock levels reach population {worst:.3g} > {TAIL_TOL:g}; "
               f"increase fock.dim (now {config.fock_dim})")
        notes.append("truncation warning: " + msg)
        if config.fock_strict:
            raise TruncationError(msg)
        warnings.warn(msg, TruncationWarning, stacklevel=3)


def _manifest(config: ScenarioConfig, setup: Setup, grid: dict, report: BoundReport,
              notes: list) -> list:
    bath = setup.bath
    items: list[tuple[str, object]] = [
        ("run_id", config.run_id),
        ("code_version", __version__),
        ("backend", _kernels.backend_name()),
        ("numpy_version", np.__version__),
        ("python_version", sys.version.split()[0]),
    ]
    items += [(f"config.{k}", v) for k, v in config.manifest_items()]
    items += [
        ("derived.beta", float(bath.beta)),
        ("derived.xi", float(bath.xi)),
        ("derived.bath_label", "inverted bath" if bath.inverted else "thermal bath"),
        ("derived.rate", float(setup.rate)),
        ("derived.gamma_eff", float(setup.gamma_eff)),
        ("derived.dims", "x".join(str(d) for d in setup.dims)),
        ("derived.initial_state", _fmt(config.default_initial_state)),
        ("derived.t_max", float(config.horizon)),
    ]
    items += [(f"grid.{k}", v) for k, v in grid.items()]
    items += [
        ("tol.hermiticity", TOL_HERM),
        ("tol.trace", TOL_TRACE),
        ("tol.positivity", TOL_POS),
        ("tol.fock_tail", TAIL_TOL),
        ("tol.violation", float(report.tol)),
        ("tol.violation_min_points", MIN_VIOLATION_POINTS),
    ]
    for name, vals in report.residuals.items():
        items.append((f"bound.min_residual.{name}", float(np.min(vals))))
        items.append((f"bound.intervals.{name}", len(report.intervals.get(name, []))))
    for i, note in enumerate(notes):
        items.append((f"note.{i}", note))
    return items


def _run_discrete_part(config: ScenarioConfig):
    coupling = config.discrete_coupling()
    setup = build_setup(config, coupling)
    n = discrete_steps(config)
    every = _stride(config, n)
    records = CollisionEngine(setup, coupling.g, coupling.tau).run(setup.rho0, n)
    cols = analyze_discrete(records, setup, coupling.tau, every)
    return setup, records, cols, {"tau": coupling.tau, "g": coupling.g, "n_collisions": n,
                                  "save_every": every}


def _deviation(config: ScenarioConfig, setup: Setup, records, grid: dict) -> dict:
    """Trace distance between discrete states and the generator trajectory at t = n tau."""
    tau = grid["tau"]
    dt_c = grid.get("dt") or min(1e-3 / setup.gamma_eff, 1e-3 / setup.bath.omega)
    k = max(1, math.ceil(tau / dt_c - 1e-9))
    every = grid["save_every"]
    n = (grid["n_collisions"] // every) * every
    if n == 0:
        return {"t": np.zeros(1), "trace_distance": np.zeros(1)}
    traj = evolve(setup.generator, setup.rho0, n * tau, tau / k, k * every)
    disc = discrete_states(records, setup.rho0)[::every][: len(traj)]
    dist = np.array([trace_distance(a, b) for a, b in zip(disc, traj.states)])
    return {"t": traj.times[: len(dist)], "trace_distance": dist}


def run_scenario(config: ScenarioConfig, out_dir: str | None = None,
                 write: bool = True) -> RunResult:
    """Simulate one configuration and (optionally) write its files under out/run-id."""
    if config.sweep_param is not None:
        raise ConfigError("configuration defines a sweep; use run_sweep", key="sweep.param")
    notes: list[str] = []
    traj = disc_cols = deviation = None
    if config.mode in ("continuous", "both"):
        cont_cfg = config if config.mode == "continuous" else _continuous_view(config)
        setup, traj, grid = simulate_continuous(cont_cfg)
        cols = analyze_continuous(traj, setup, config.literal_heat)
        cols["dist_eq"] = equilibrium_distance(traj.states, setup)
        _check_truncation(cols, config, notes)
    if config.mode in ("discrete", "both"):
        d_setup, records, disc_cols, d_grid = _run_discrete_part(config)
        if config.mode == "discrete":
            setup, cols, grid = d_setup, disc_cols, d_grid
        else:
            grid = {**grid, **{f"discrete_{k}": v for k, v in d_grid.items()}}
            deviation = _deviation(config, setup, records, {**d_grid, "dt": config.dt})
    tol = violation_tolerance(setup.bath.beta, setup.bath.omega, setup.gamma_eff)
    report = detect_violations(config.scenario, cols["t"], residual_series(cols, setup), tol)
    run_dir = None
    if write:
        run_dir = os.path.join(out_dir or config.output, config.run_id)
        os.makedirs(run_dir, exist_ok=True)
        write_csv(os.path.join(run_dir, "series.csv"), cols)
        write_bounds(os.path.join(run_dir, "bounds.csv"), report)
        if config.mode == "both":
            write_csv(os.path.join(run_dir, "series_discrete.csv"), disc_cols)
            write_csv(os.path.join(run_dir, "deviation.csv"), deviation)
        write_manifest(os.path.join(run_dir, "manifest.txt"),
                       _manifest(config, setup, grid, report, notes))
    return RunResult(run_dir, setup, cols, report, grid, traj, disc_cols, deviation, notes)


def _continuous_view(config: ScenarioConfig) -> ScenarioConfig:
    """The continuous-mode twin of a discrete config (rate from g^2 tau)."""
    rate = config.rate
    if config.is_indirect:
        return config.replace(mode="continuous", g=None, tau=None, gamma_g=rate)
    return config.replace(mode="continuous", g=None, tau=None, gamma=rate)


@dataclass
class SweepResult:
    run_dir: str | None
    summary: dict
    points: list


def _sweep_point(args):
    config, out_dir, write = args
    res = run_scenario(config, out_dir, write)
    cols = res.series
    beta = res.setup.bath.beta
    sub = [np.min(cols[f"residual_{lab}"]) for lab in res.setup.labels] \
        if res.setup.n_sites >= 2 else [np.min(cols["residual"])]
    row = {
        "q_oscillations": count_oscillations(beta * cols["Q_rate"]),
        "t_equilibrium": equilibration_time(cols["t"], cols["dist_eq"]),
        "min_residual": float(np.min(cols["residual"])),
        "min_residual_subsystems": float(min(sub)),
        "violation_intervals": sum(len(v) for k, v in res.report.intervals.items()
                                   if k != "total"),
    }
    return row, res


def run_sweep(config: ScenarioConfig, out_dir: str | None = None, workers: int | None = None,
              write: bool = True) -> SweepResult:
    """One run per sweep value (optionally in parallel) plus a summary table."""
    if config.sweep_param is None:
        raise ConfigError("no sweep configured", key="sweep.param")
    if config.mode != "continuous":
        raise ConfigError("sweeps run in continuous mode", key="mode",
                          line=config.lines.get("mode"))
    base = os.path.join(out_dir or config.output, config.run_id)
    jobs = []
    for v in config.sweep_values:
        point = config.with_sweep_value(v)
        label = f"{config.sweep_param}_{v:g}"
        jobs.append((point.replace(name=label), base, write))
    workers = workers or config.workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    summary = {"value": np.array(config.sweep_values, dtype=float)}
    for key in results[0][0]:
        summary[key] = np.array([r[0][key] for r in results], dtype=float)
    if write:
        os.makedirs(base, exist_ok=True)
        write_csv(os.path.join(base, "summary.csv"), summary)
    return SweepResult(base if write else None, summary, [r[1] for r in results])
