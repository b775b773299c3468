"""Thermodynamic observables along trajectories: energy, heat, entropy, Landauer residuals."""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ArgumentError
from .collision import discrete_states
from .hilbert import (EPS_EIG, Operator, embed, partial_trace_array,
                      von_neumann_entropy)
from .lindblad import Trajectory, apply_generator
from .models import BathSpec, CouplingSpec, FockSpace, InteractionSpec, collective_jump_operators

TOL_RESIDUAL = 1e-6
MIN_VIOLATION_POINTS = 3


def _arr(x) -> np.ndarray:
    return x.mat if isinstance(x, Operator) else np.asarray(x)


def _tr(a: np.ndarray, b: np.ndarray) -> float:
    """Re Tr[a b] without forming the product."""
    return float(np.real(np.einsum("ij,ji->", a, b)))


# ---------------------------------------------------------------- energy and heat

def energy(rho, h_s) -> float:
    return _tr(_arr(h_s), _arr(rho))


def energy_rate(rho_dot, h_s) -> float:
    """Tr[H_S rho_dot]."""
    rd, h = _arr(rho_dot), _arr(h_s)
    if rd.shape != h.shape:
        raise ArgumentError("shape mismatch in energy_rate")
    return _tr(h, rd)


def heat_rate(rho_dot, h_s) -> float:
    """Q_dot = -Tr[H_S rho_dot]; positive when heat flows into the environment."""
    return -energy_rate(rho_dot, h_s)


def double_sum_operator(interaction: InteractionSpec, eta, h_s, gamma: float) -> np.ndarray:
    """O with Tr[O rho] = gamma sum_kj <R_k R_j>_eta <S_k H S_j - {S_k S_j, H}/2>_rho."""
    h, e = _arr(h_s), _arr(eta)
    out = np.zeros(h.shape, dtype=complex)
    for (sk, rk), (sj, rj) in itertools.product(
            zip(interaction.s_ops, interaction.r_ops), repeat=2):
        c = np.trace(rk.mat @ rj.mat @ e)
        a, b = sk.mat, sj.mat
        out += c * (a @ h @ b - 0.5 * (a @ b @ h + h @ a @ b))
    return gamma * out


def energy_rate_double_sum(rho, interaction: InteractionSpec, eta, h_s, gamma: float) -> float:
    """Energy change rate from the generator's double sum over interaction terms."""
    return _tr(double_sum_operator(interaction, eta, h_s, gamma), _arr(rho))


def heat_coefficients(interaction: InteractionSpec, eta, h_r):
    """alpha_kj = <R_k H R_j - {R_k R_j, H}/2> and beta_kj = <R_k [H, R_j]> over eta."""
    e, h = _arr(eta), _arr(h_r)
    n = len(interaction.r_ops)
    alpha = np.empty((n, n), dtype=complex)
    beta = np.empty((n, n), dtype=complex)
    for k, j in itertools.product(range(n), repeat=2):
        rk, rj = interaction.r_ops[k].mat, interaction.r_ops[j].mat
        alpha[k, j] = np.trace((rk @ h @ rj - 0.5 * (rk @ rj @ h + h @ rk @ rj)) @ e)
        beta[k, j] = np.trace(rk @ (h @ rj - rj @ h) @ e)
    return alpha, beta


def environment_heat_operator(dims: Sequence[int], sites: Sequence[int],
                              interaction: InteractionSpec, eta, h_r,
                              gamma: float) -> np.ndarray:
    """O with Re Tr[O rho] equal to :func:`environment_heat_rate`."""
    alpha, beta = heat_coefficients(interaction, eta, h_r)
    lifted = {s: [embed(o.mat, s, dims) for o in interaction.s_ops] for s in sites}
    d = int(np.prod(dims))
    out = np.zeros((d, d), dtype=complex)
    for s in sites:
        ops = lifted[s]
        for k, j in itertools.product(range(len(ops)), repeat=2):
            out += alpha[k, j] * (ops[k] @ ops[j])
    for i, first in enumerate(sites):
        for later in sites[i + 1:]:
            for k, j in itertools.product(range(len(interaction.s_ops)), repeat=2):
                out += 2.0 * np.real(beta[k, j]) * (lifted[first][k] @ lifted[later][j])
    return gamma * out


def environment_heat_rate(rho, dims: Sequence[int], sites: Sequence[int],
                          interaction: InteractionSpec, eta, h_r, gamma: float) -> float:
    """Heat absorbed by the sub-environments, computed on the environment side.

    gamma sum_X sum_kj alpha_kj <S_k^X S_j^X> + gamma sum_{X<Y} sum_kj 2 Re(beta_kj) <S_k^X S_j^Y>,
    where X precedes Y in the collision order.
    """
    op = environment_heat_operator(dims, sites, interaction, eta, h_r, gamma)
    return _tr(op, _arr(rho))


def cascade_heat_closed_form(rho, bath: BathSpec, gamma: float) -> tuple[float, float, float]:
    """(Q_dot, Q_dot_A, Q_dot_B) of the two-qubit cascade from matrix elements.

    Basis order |uu>, |ud>, |du>, |dd> (u = excited).
    """
    r = _arr(rho)
    if r.shape != (4, 4):
        raise ArgumentError("closed forms need a two-qubit state")
    xi, w = bath.xi, bath.omega
    p_uu, p_ud, p_du, p_dd = np.real(np.diag(r))
    coh = 2.0 * np.real(r[1, 2])
    q_tot = 4 * gamma * w * (xi * (1 + coh) + (p_uu - p_dd))
    q_a = 2 * gamma * w * ((1 + xi) * (p_uu + p_ud) - (1 - xi) * (p_du + p_dd))
    q_b = 2 * gamma * w * ((1 + xi) * (p_uu + p_du) - (1 - xi) * (p_ud + p_dd)
                           + 2 * xi * coh)
    return float(q_tot), float(q_a), float(q_b)


def oscillator_heat_rate(rho, bath: BathSpec, coupling: CouplingSpec, fock: FockSpace,
                         literal_heat: bool = False) -> float:
    """Heat flow of the qubit-oscillator model from oscillator Fock populations.

    omega gamma_g sum_n n [(1+xi) p_n - (1-xi) p_{n-1}]. With ``literal_heat``
    the loss term enters with a plus sign instead, which cannot change sign and
    is kept only for comparison.
    """
    p = np.real(np.diag(partial_trace_array(_arr(rho), (2, fock.n_max), [1])))
    n = np.arange(fock.n_max)
    prev = np.concatenate([[0.0], p[:-1]])
    sign = 1.0 if literal_heat else -1.0
    xi = bath.xi
    return float(bath.omega * coupling.gamma_g
                 * np.sum(n * ((1 + xi) * p + sign * (1 - xi) * prev)))


def subsystem_heat_rates(rho_dot, dims: Sequence[int], h_locals: Sequence) -> list[float]:
    """Q_dot_X = -Tr[H_X d(rho_X)/dt] for every subsystem X."""
    rd = _arr(rho_dot)
    if len(dims) < 2:
        raise ArgumentError("subsystem heat rates need a multipartite system")
    return [-_tr(_arr(h), partial_trace_array(rd, dims, [k]))
            for k, h in enumerate(h_locals)]


@functools.lru_cache(maxsize=None)
def _radiation_operator(n: int) -> np.ndarray:
    jp, jm = collective_jump_operators(n)
    return jp.mat @ jm.mat


def radiation_rate(rho, n: int) -> float:
    """<J^+ J^-> for collective ladder operators on n qubits."""
    r = _arr(rho)
    if r.shape != (2 ** n, 2 ** n):
        raise ArgumentError("state does not match n qubits")
    return _tr(_radiation_operator(n), r)


# ---------------------------------------------------------------- entropy

def entropy_and_rate(rho, rho_dot, eps: float = EPS_EIG) -> tuple[float, float, bool]:
    """(S, dS/dt, floored) from a single eigendecomposition; see :func:`entropy_rate`."""
    r, rd = _arr(rho), _arr(rho_dot)
    vals, vecs = np.linalg.eigh(0.5 * (r + r.conj().T))
    logs = np.log(np.maximum(vals, eps))
    rd_diag = np.real(np.sum(vecs.conj() * (rd @ vecs), axis=0))
    floored = bool(np.any((vals < eps) & (np.abs(rd_diag) > 1e-10)))
    keep = vals > eps
    ent = float(-np.sum(vals[keep] * logs[keep]))
    return ent, float(-np.dot(rd_diag, logs)), floored


def entropy_rate(rho, rho_dot, eps: float = EPS_EIG) -> tuple[float, bool]:
    """(dS/dt, floored) with dS/dt = -Tr[rho_dot ln rho].

    Eigenvalues below ``eps`` are raised to ``eps`` before the logarithm.
    ``floored`` reports that such a level is being populated at a rate above
    1e-10, i.e. the value is a regularized stand-in for a divergent rate.
    The expression is exact for degenerate spectra as well.
    """
    _, rate, floored = entropy_and_rate(rho, rho_dot, eps)
    return rate, floored


def entropy_rates_of_subsets(rho, rho_dot, dims: Sequence[int],
                             subsets: Sequence[Sequence[int]]) -> dict:
    """{subset: dS/dt} for marginals, using d(rho_X)/dt = Tr_rest rho_dot."""
    full = _subset_spectra(rho, rho_dot, dims, subsets)
    return {k: v[1] for k, v in full.items()}


def _subset_spectra(rho, rho_dot, dims, subsets) -> dict:
    """{subset: (S, dS/dt, floored)} for each marginal in ``subsets``."""
    r, rd = _arr(rho), _arr(rho_dot)
    out = {}
    for sub in subsets:
        key = tuple(sorted(sub))
        if key not in out:
            out[key] = entropy_and_rate(partial_trace_array(r, dims, key),
                                        partial_trace_array(rd, dims, key))
    return out


def _decomposition_subsets(n: int):
    return [tuple(range(n))] + [(k,) for k in range(n)] + [(0, k) for k in range(1, n)]


def landauer_residual(beta: float, q_rate, s_rate):
    """beta Q_dot - d(-S)/dt = beta Q_dot + dS/dt."""
    if np.ndim(q_rate) or np.ndim(s_rate):
        return beta * np.asarray(q_rate, dtype=float) + np.asarray(s_rate, dtype=float)
    return float(beta * q_rate + s_rate)


def finite_difference(values, dt: float) -> np.ndarray:
    """d/dt of a uniformly sampled series: 5-point stencil inside, lower order near ends."""
    y = np.asarray(values, dtype=float)
    n = y.size
    if n < 2:
        raise ArgumentError("need at least two samples")
    if n < 5:
        return np.gradient(y, dt, edge_order=1 if n < 3 else 2)
    out = np.gradient(y, dt, edge_order=2)
    out[2:-2] = (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * dt)
    return out


# ---------------------------------------------------------------- decompositions

@dataclass(frozen=True)
class DecompositionTerms:
    """Rate terms of the erasure decomposition and their sum.

    ``local`` is n d(-S_1)/dt; ``cond_forward`` sums dS_{1|k}/dt and
    ``cond_backward`` sums dS_{k|1}/dt over k >= 2; ``correlation`` is dI_N/dt.
    ``total`` = local + cond_forward - cond_backward + correlation and equals
    ``target`` = -dS/dt of the joint state.
    """

    local: float
    cond_forward: float
    cond_backward: float
    correlation: float
    total: float
    target: float


def multipartite_terms(rho, rho_dot, dims: Sequence[int]) -> DecompositionTerms:
    n = len(dims)
    if n < 2:
        raise ArgumentError("decomposition needs at least two subsystems")
    s = entropy_rates_of_subsets(rho, rho_dot, dims, _decomposition_subsets(n))
    return terms_from_rates(s, n)


def terms_from_rates(s: dict, n: int) -> DecompositionTerms:
    """Decomposition from {subset: dS/dt} covering the full set, singles and pairs (0, k)."""
    full = tuple(range(n))
    local = -n * s[(0,)]
    # S_{1|k} = S_{1k} - S_k and S_{k|1} = S_{1k} - S_1
    fwd = sum(s[(0, k)] - s[(k,)] for k in range(1, n))
    bwd = sum(s[(0, k)] - s[(0,)] for k in range(1, n))
    corr = sum(s[(k,)] for k in range(n)) - s[full]
    total = local + fwd - bwd + corr
    return DecompositionTerms(local, fwd, bwd, corr, total, -s[full])


def _traj_point(traj: Trajectory, index: int):
    if traj.generator is None:
        raise ArgumentError("trajectory carries no generator")
    rho = traj.states[index]
    return rho, apply_generator(traj.generator, rho)


def cascade_decomposition(traj: Trajectory, index: int) -> DecompositionTerms:
    """2 d(-S_A)/dt + dS_{A|B}/dt - dS_{B|A}/dt + dI(A:B)/dt at one grid point."""
    if len(traj.dims) != 2:
        raise ArgumentError("cascade decomposition needs a bipartite trajectory")
    return multipartite_terms(*_traj_point(traj, index), traj.dims)


def multipartite_decomposition(traj: Trajectory, index: int, n: int) -> DecompositionTerms:
    if len(traj.dims) != n:
        raise ArgumentError(f"trajectory has {len(traj.dims)} subsystems, not {n}")
    if len(set(traj.dims)) != 1:
        raise ArgumentError("decomposition assumes identical subsystems")
    return multipartite_terms(*_traj_point(traj, index), traj.dims)


# ---------------------------------------------------------------- violations

def violation_tolerance(beta: float, omega: float, gamma_eff: float) -> float:
    return TOL_RESIDUAL * abs(beta) * omega * gamma_eff


@dataclass
class BoundReport:
    """Residual series and the intervals where they drop below -tol."""

    scenario: str
    times: np.ndarray
    residuals: dict
    tol: float
    intervals: dict = field(default_factory=dict)

    def has_violation(self, name: str) -> bool:
        return bool(self.intervals.get(name))

    def rows(self):
        """(series, t_start, t_end, min residual) for every interval."""
        for name in self.residuals:
            for t0, t1, m in self.intervals.get(name, []):
                yield name, t0, t1, m


def find_intervals(times, values, tol: float, min_points: int = MIN_VIOLATION_POINTS):
    """Maximal runs with values < -tol lasting at least ``min_points`` samples."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    below = v < -tol
    out = []
    i, n = 0, v.size
    while i < n:
        if below[i]:
            j = i
            while j + 1 < n and below[j + 1]:
                j += 1
            if j - i + 1 >= min_points:
                out.append((float(t[i]), float(t[j]), float(v[i:j + 1].min())))
            i = j + 1
        else:
            i += 1
    return out


def detect_violations(scenario: str, times, residuals: dict, tol: float,
                      min_points: int = MIN_VIOLATION_POINTS) -> BoundReport:
    intervals = {name: find_intervals(times, vals, tol, min_points)
                 for name, vals in residuals.items()}
    return BoundReport(scenario, np.asarray(times), dict(residuals), tol, intervals)


# ---------------------------------------------------------------- per-trajectory tables

def gibbs_log_partition(setup) -> float:
    """ln Tr exp(-beta H_S) for the product of local Hamiltonians.

    With it, S(rho | rho_eq) = beta E - S + ln Z, which stays finite even when
    Gibbs populations underflow any support threshold.
    """
    beta = setup.bath.beta
    total = 0.0
    for h in setup.h_locals:
        x = -beta * np.linalg.eigvalsh(h.mat)
        m = x.max()
        total += m + math.log(np.exp(x - m).sum())
    return total


_entropy = von_neumann_entropy


def _expectations(op: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Re Tr[op rho] for a stack of states."""
    return np.real(np.einsum("ij,tji->t", op, states))


def analyze_continuous(traj: Trajectory, setup, literal_heat: bool = False) -> dict:
    """Column table of every observable on the trajectory grid (see README for names)."""
    dims, n = setup.dims, setup.n_sites
    beta = setup.bath.beta
    h_s = setup.h_system.mat
    states = traj.states
    dots = traj.rho_dots()
    cols: dict[str, list] = {}

    def put(name, value):
        cols.setdefault(name, []).append(value)

    log_z = gibbs_log_partition(setup)
    eta = setup.bath.state()
    h_r = setup.bath.hamiltonian()
    qubits = all(d == 2 for d in dims)
    q_env = _expectations(environment_heat_operator(
        dims, setup.bath_sites, setup.interaction, eta, h_r, setup.rate), states)
    if setup.kind == "single":
        e_dsum = _expectations(double_sum_operator(setup.interaction, eta, h_s, setup.rate),
                               states)
    if qubits and setup.kind in ("single", "cascade"):
        rad = _expectations(_radiation_operator(n), states)
    for i, (t, r, rd) in enumerate(zip(traj.times, states, dots)):
        put("t", t)
        put("E", energy(r, h_s))
        e_rate = energy_rate(rd, h_s)
        q_rate = -e_rate
        put("E_rate", e_rate)
        put("Q_rate", q_rate)
        put("Q_rate_env", q_env[i])
        spec = _subset_spectra(r, rd, dims, _decomposition_subsets(n) if n >= 2 else [(0,)])
        ent, s_rate, floored = spec[tuple(range(n))]
        put("S", ent)
        put("S_rate", s_rate)
        put("S_floored", int(floored))
        put("residual", landauer_residual(beta, q_rate, s_rate))
        put("rel_entropy", beta * cols["E"][-1] - ent + log_z)
        if setup.kind == "single":
            put("E_rate_double_sum", e_dsum[i])
        if n >= 2:
            q_sub = subsystem_heat_rates(rd, dims, setup.h_locals)
            for k, label in enumerate(setup.labels):
                sk, sk_rate, _ = spec[(k,)]
                put(f"E_{label}", energy(partial_trace_array(r, dims, [k]),
                                         setup.h_locals[k].mat))
                put(f"Q_rate_{label}", q_sub[k])
                put(f"S_{label}", sk)
                put(f"S_rate_{label}", sk_rate)
                put(f"residual_{label}", landauer_residual(beta, q_sub[k], sk_rate))
            terms = terms_from_rates({k: v[1] for k, v in spec.items()}, n)
            corr_info = sum(spec[(k,)][0] for k in range(n)) - ent
            if n == 2:
                put("I_AB", corr_info)
                put("I_rate", terms.correlation)
                put("S_rate_A_given_B", terms.cond_forward)
                put("S_rate_B_given_A", terms.cond_backward)
            else:
                put("I_N", corr_info)
                put("I_N_rate", terms.correlation)
                put("S_rate_1_given_k", terms.cond_forward)
                put("S_rate_k_given_1", terms.cond_backward)
            put("decomp_local", terms.local)
            put("decomp_sum", terms.total)
        if setup.kind == "cascade" and n == 2:
            q_tot, q_a, q_b = cascade_heat_closed_form(r, setup.bath, setup.rate)
            put("Q_rate_closed", q_tot)
            put("Q_rate_A_closed", q_a)
            put("Q_rate_B_closed", q_b)
        if qubits and setup.kind in ("single", "cascade"):
            put("radiation_rate", rad[i])
        if setup.kind == "indirect_oscillator":
            put("Q_rate_occupation", oscillator_heat_rate(r, setup.bath, setup.coupling,
                                                          setup.fock))
            if literal_heat:
                put("Q_rate_occupation_literal", oscillator_heat_rate(
                    r, setup.bath, setup.coupling, setup.fock, literal_heat=True))
            p = np.real(np.diag(partial_trace_array(r, dims, [1])))
            put("fock_tail", float(p[-2:].sum()))
    return {k: np.asarray(v, dtype=float) for k, v in cols.items()}


def analyze_discrete(records, setup, tau: float, stride: int = 1) -> dict:
    """Column table for a collision trajectory, sampled every ``stride`` collisions.

    Rates are per-collision increments divided by tau for the step starting at
    the sampled index; the last sample carries no step and is omitted.
    """
    dims, n = setup.dims, setup.n_sites
    beta = setup.bath.beta
    h_s = setup.h_system.mat
    states = discrete_states(records, setup.rho0)
    if len(records) == 0:
        raise ArgumentError("no collisions to analyze")
    ent = np.array([_entropy(r) for r in states])
    q_cum = np.concatenate([[0.0], np.cumsum([rec.delta_Q for rec in records])])
    idx = np.arange(0, len(records), stride)
    cols: dict[str, np.ndarray] = {}
    cols["t"] = idx * tau
    cols["E"] = np.array([energy(states[i], h_s) for i in idx])
    cols["Q_cum"] = q_cum[idx]
    cols["E_rate"] = np.array([records[i].delta_E for i in idx]) / tau
    cols["Q_rate"] = np.array([records[i].delta_Q for i in idx]) / tau
    cols["S"] = ent[idx]
    cols["S_rate"] = (ent[idx + 1] - ent[idx]) / tau
    cols["residual"] = landauer_residual(beta, cols["Q_rate"], cols["S_rate"])
    if n >= 2:
        for k, label in enumerate(setup.labels):
            hk = setup.h_locals[k].mat
            marg = np.array([partial_trace_array(r, dims, [k]) for r in states])
            ek = np.array([energy(m, hk) for m in marg])
            sk = np.array([_entropy(m) for m in marg])
            if setup.kind == "cascade":
                q_k = np.array([records[i].delta_Q_parts[k] for i in idx]) / tau
            else:
                q_k = -(ek[idx + 1] - ek[idx]) / tau
            cols[f"E_{label}"] = ek[idx]
            cols[f"Q_rate_{label}"] = q_k
            cols[f"S_{label}"] = sk[idx]
            cols[f"S_rate_{label}"] = (sk[idx + 1] - sk[idx]) / tau
            cols[f"residual_{label}"] = landauer_residual(beta, q_k, cols[f"S_rate_{label}"])
    return cols

