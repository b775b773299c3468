"""Continuous-time generators of the collision models and their integration."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import _kernels
from .errors import ArgumentError, IntegrationError
from .hilbert import (DensityMatrix, Operator, SpaceShape, embed, hermiticity_error,
                      partial_trace_array)
from .models import (SIGMA_MINUS, SIGMA_PLUS, BathSpec, CouplingSpec, FockSpace,
                     InteractionSpec, exchange_hamiltonian, exchange_interaction_qubit,
                     jaynes_cummings_hamiltonian, oscillator_bath_interaction,
                     xx_interaction)


def lindblad_dissipator(op: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """o rho o^dag - {o^dag o, rho}/2."""
    od = op.conj().T
    odo = od @ op
    return op @ rho @ od - 0.5 * (odo @ rho + rho @ odo)


def compress_sandwiches(X: np.ndarray, Y: np.ndarray, rtol: float = 1e-13):
    """Minimal (X', Y') with sum_m X'_m . Y'_m equal to sum_m X_m . Y_m."""
    m, d, _ = X.shape
    qx, rx = np.linalg.qr(X.reshape(m, d * d).T)
    qy, ry = np.linalg.qr(Y.reshape(m, d * d).T)
    u, s, vh = np.linalg.svd(rx @ ry.T)
    r = int(np.sum(s > rtol * max(s[0], 1e-300)))
    if r >= m:
        return X, Y
    root = np.sqrt(s[:r])
    xn = (qx @ (u[:, :r] * root)).T.reshape(r, d, d)
    yn = (qy @ (vh[:r].T * root)).T.reshape(r, d, d)
    return np.ascontiguousarray(xn), np.ascontiguousarray(yn)


@dataclass(frozen=True)
class GeneratorSpec:
    """Hamiltonian part, weighted dissipators and ordered cascade cross terms.

    A cross term ``(A, B, c)`` stands for c [A rho, B] + conj(c) [B, rho A],
    where A acts on the subsystem that meets each sub-environment first.
    """

    dims: tuple[int, ...]
    hamiltonian: np.ndarray | None = None
    dissipators: tuple = ()
    cross_terms: tuple = ()

    def __post_init__(self):
        space = SpaceShape(self.dims)
        object.__setattr__(self, "dims", space.dims)
        d = space.total
        for op, w in self.dissipators:
            if w < 0:
                raise ArgumentError("dissipator rates must be non-negative")
            if op.shape != (d, d):
                raise ArgumentError("dissipator shape mismatch")
        if self.hamiltonian is not None and self.hamiltonian.shape != (d, d):
            raise ArgumentError("hamiltonian shape mismatch")

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def sandwich_form(self, compress: bool | None = None):
        """(M, X, Y) with rho_dot = M rho + rho M^dag + sum_m X_m rho Y_m.

        With ``compress`` the sandwich sum is rewritten with the fewest terms
        (operator-Schmidt rank). Those terms are usually dense, so by default
        the form with fewer stored nonzeros is returned.
        """
        d = self.dim
        M = np.zeros((d, d), dtype=complex)
        xs, ys = [], []
        if self.hamiltonian is not None:
            M += -1j * self.hamiltonian
        for op, w in self.dissipators:
            if w == 0:
                continue
            od = op.conj().T
            M += -0.5 * w * (od @ op)
            xs.append(w * op)
            ys.append(od)
        for a, b, c in self.cross_terms:
            if c == 0:
                continue
            # c (A rho B - B A rho) + conj(c) (B rho A - rho A B)
            M += -c * (b @ a)
            xs.append(c * a)
            ys.append(b)
            xs.append(np.conj(c) * b)
            ys.append(a)
        X = np.array(xs, dtype=complex).reshape(len(xs), d, d)
        Y = np.array(ys, dtype=complex).reshape(len(ys), d, d)
        if compress is not False and len(xs) > 1:
            Xc, Yc = compress_sandwiches(X, Y)
            if compress or (_kernels.nnz(Xc) + _kernels.nnz(Yc)
                            < _kernels.nnz(X) + _kernels.nnz(Y)):
                X, Y = Xc, Yc
        return M, X, Y

    def max_rate(self) -> float:
        rates = [w * np.linalg.norm(op, 2) ** 2 for op, w in self.dissipators]
        return max(rates, default=0.0)


def apply_generator(gen: GeneratorSpec, rho) -> np.ndarray:
    """rho_dot for a state given as an Operator or array."""
    mat = rho.mat if isinstance(rho, Operator) else np.asarray(rho, dtype=complex)
    if mat.shape != (gen.dim, gen.dim):
        raise ArgumentError(f"state of size {mat.shape} does not fit generator {gen.dims}")
    out = np.zeros_like(mat)
    if gen.hamiltonian is not None:
        h = gen.hamiltonian
        out += -1j * (h @ mat - mat @ h)
    for op, w in gen.dissipators:
        out += w * lindblad_dissipator(op, mat)
    for a, b, c in gen.cross_terms:
        out += c * (a @ mat @ b - b @ a @ mat) + np.conj(c) * (b @ mat @ a - mat @ a @ b)
    return out


def correlation_matrix(r_ops: Sequence[Operator], eta: Operator) -> np.ndarray:
    """C[k, j] = <R_k R_j>_eta."""
    n = len(r_ops)
    C = np.empty((n, n), dtype=complex)
    for k in range(n):
        for j in range(n):
            C[k, j] = np.trace(r_ops[k].mat @ r_ops[j].mat @ eta.mat)
    return C


def _local_dissipators(s_ops: Sequence[np.ndarray], C: np.ndarray, rate: float):
    """Diagonalize sum_kj C_kj (S_j rho S_k - {S_k S_j, rho}/2) into jump operators."""
    vals, vecs = np.linalg.eigh(0.5 * (C + C.conj().T))
    out = []
    for m, lam in enumerate(vals):
        if lam <= 1e-14 * max(1.0, vals.max()):
            continue
        op = sum(np.conj(vecs[j, m]) * s_ops[j] for j in range(len(s_ops)))
        out.append((op, rate * float(lam)))
    return out


def generator_from_interactions(dims: Sequence[int], sites: Sequence[int],
                                interaction: InteractionSpec, eta: Operator,
                                gamma: float, hamiltonian: np.ndarray | None = None
                                ) -> GeneratorSpec:
    """Second-order generator for one sub-environment meeting ``sites`` in order.

    Each site gets the local dissipator built from <R_k R_j>; every ordered pair
    (earlier, later) gets the cascade cross term.
    """
    interaction.check_zero_mean(eta)
    dims = tuple(dims)
    C = correlation_matrix(interaction.r_ops, eta)
    lifted = {s: [embed(o.mat, s, dims) for o in interaction.s_ops] for s in sites}
    dissipators = []
    for s in sites:
        dissipators.extend(_local_dissipators(lifted[s], C, gamma))
    cross = []
    for i, first in enumerate(sites):
        for later in sites[i + 1:]:
            for k, a in enumerate(lifted[first]):
                for j, b in enumerate(lifted[later]):
                    cross.append((a, b, gamma * C[j, k]))
    return GeneratorSpec(dims, hamiltonian, tuple(dissipators), tuple(cross))


def qubit_rates(bath: BathSpec, gamma: float) -> tuple[float, float]:
    """(Gamma^+, Gamma^-) = 2 gamma (1 +- xi)."""
    xi = bath.xi
    return 2 * gamma * (1 + xi), 2 * gamma * (1 - xi)


def generator_single(bath: BathSpec, coupling: CouplingSpec) -> GeneratorSpec:
    """Single qubit under XX collisions: Gamma^+ L[s^-] + Gamma^- L[s^+]."""
    gp, gm = qubit_rates(bath, coupling.gamma)
    return GeneratorSpec((2,), None, ((SIGMA_MINUS, gp), (SIGMA_PLUS, gm)))


def generator_cascade(n: int, bath: BathSpec, coupling: CouplingSpec) -> GeneratorSpec:
    """N qubits meeting each sub-environment in the order 0, 1, ..., n-1."""
    if n < 2:
        raise ArgumentError("cascade needs at least two subsystems")
    return generator_from_interactions((2,) * n, list(range(n)), xx_interaction(),
                                       bath.state(), coupling.gamma)


def cascade_rhs_explicit(rho: np.ndarray, bath: BathSpec, gamma: float) -> np.ndarray:
    """Two-qubit cascade written with ladder operators and Gamma^{+-} (reference form)."""
    gp, gm = qubit_rates(bath, gamma)
    dims = (2, 2)
    smA, spA = embed(SIGMA_MINUS, 0, dims), embed(SIGMA_PLUS, 0, dims)
    smB, spB = embed(SIGMA_MINUS, 1, dims), embed(SIGMA_PLUS, 1, dims)

    def comm(x, y):
        return x @ y - y @ x

    out = (gp * lindblad_dissipator(smA, rho) + gm * lindblad_dissipator(spA, rho)
           + gp * lindblad_dissipator(smB, rho) + gm * lindblad_dissipator(spB, rho))
    out += gp * (smA @ comm(rho, spB) - comm(rho, smB) @ spA)
    out += gm * (spA @ comm(rho, smB) - comm(rho, spB) @ smA)
    return out


def indirect_parts(kind: str, bath: BathSpec, coupling: CouplingSpec,
                   fock: FockSpace | None = None):
    """(dims, H_AB, bath interaction on S_B) for the indirect-erasure models."""
    if kind == "oscillator":
        if fock is None:
            raise ArgumentError("oscillator model needs a FockSpace")
        h = jaynes_cummings_hamiltonian(bath.omega, coupling.J, fock)
        return (2, fock.n_max), h, oscillator_bath_interaction(fock)
    if kind == "qubit":
        if fock is not None:
            raise ArgumentError("qubit model takes no FockSpace")
        return (2, 2), exchange_hamiltonian(bath.omega, coupling.J), exchange_interaction_qubit()
    raise ArgumentError(f"unknown indirect model '{kind}'")


def generator_indirect(kind: str, bath: BathSpec, coupling: CouplingSpec,
                       fock: FockSpace | None = None) -> GeneratorSpec:
    """-i[H_AB, rho] plus bath dissipation on S_B only, at rate gamma_g."""
    dims, h, inter = indirect_parts(kind, bath, coupling, fock)
    return generator_from_interactions(dims, [1], inter, bath.state(), coupling.gamma_g,
                                       hamiltonian=h.mat)


def oscillator_rhs_explicit(rho: np.ndarray, bath: BathSpec, coupling: CouplingSpec,
                            fock: FockSpace) -> np.ndarray:
    """-i[H_AB, rho] + g(1-xi) L[b^dag] + g(1+xi) L[b] (reference form)."""
    h = jaynes_cummings_hamiltonian(bath.omega, coupling.J, fock).mat
    b = embed(fock.destroy(), 1, (2, fock.n_max))
    xi, gg = bath.xi, coupling.gamma_g
    return (-1j * (h @ rho - rho @ h) + gg * (1 - xi) * lindblad_dissipator(b.conj().T, rho)
            + gg * (1 + xi) * lindblad_dissipator(b, rho))


@dataclass
class Trajectory:
    """States on a time grid plus the generator that produced them."""

    times: np.ndarray
    states: np.ndarray
    dims: tuple[int, ...]
    generator: GeneratorSpec | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> DensityMatrix:
        return DensityMatrix(self.states[i], self.dims, check=False)

    def rho_dots(self) -> np.ndarray:
        if self.generator is None:
            raise ArgumentError("trajectory carries no generator")
        M, X, Y = self.generator.sandwich_form()
        return _kernels.rhs_many(M, X, Y, self.states)

    def marginals(self, keep: Sequence[int]) -> np.ndarray:
        return np.array([partial_trace_array(r, self.dims, keep) for r in self.states])


def default_dt(gen: GeneratorSpec, omega: float = 1.0) -> float:
    rate = gen.max_rate()
    return min(1e-3 / rate if rate > 0 else math.inf, 1e-3 / omega)


def _check_emitted(states: np.ndarray, times: np.ndarray) -> None:
    for i, r in enumerate(states):
        herm = hermiticity_error(r)
        if herm > 1e-9:
            raise IntegrationError(f"state lost Hermiticity ({herm:.3g}) at t={times[i]:.6g}",
                                   times[i])
        r[...] = 0.5 * (r + r.conj().T)
        tr = np.trace(r).real
        if abs(tr - 1.0) >= 1e-9:
            raise IntegrationError(f"trace drifted to {tr!r} at t={times[i]:.6g}", times[i])
        r /= tr
        lmin = np.linalg.eigvalsh(r)[0]
        if lmin < -1e-8:
            raise IntegrationError(f"negative eigenvalue {lmin:.3g} at t={times[i]:.6g}",
                                   times[i])


def evolve(gen: GeneratorSpec, rho0, t_max: float, dt: float, save_every: int = 1,
           use_numba: bool | None = None, meta: dict | None = None) -> Trajectory:
    """Fixed-step RK4 from 0 to t_max; every ``save_every``-th state is kept and checked."""
    if not dt > 0:
        raise ArgumentError("dt must be positive")
    if t_max < dt and t_max != 0:
        raise ArgumentError("t_max must be at least dt")
    mat = rho0.mat if isinstance(rho0, Operator) else np.asarray(rho0, dtype=complex)
    if mat.shape != (gen.dim, gen.dim):
        raise ArgumentError("initial state does not fit the generator")
    n_steps = int(round(t_max / dt))
    if not math.isclose(n_steps * dt, t_max, rel_tol=1e-9, abs_tol=1e-12):
        raise ArgumentError("t_max must be an integer multiple of dt")
    n_steps -= n_steps % save_every
    M, X, Y = gen.sandwich_form()
    if n_steps == 0:
        states = mat[None].copy()
    else:
        states = _kernels.rk4_integrate(M, X, Y, mat, dt, n_steps, save_every, use_numba)
    times = dt * save_every * np.arange(states.shape[0])
    _check_emitted(states, times)
    return Trajectory(times, states, gen.dims, gen, dict(meta or {}))


def markovianity_deviation(traj: Trajectory, site: int, local_gen: GeneratorSpec) -> float:
    """max_t || d(rho_site)/dt - L_local[rho_site] ||_F along a trajectory."""
    if traj.generator is None:
        raise ArgumentError("trajectory carries no generator")
    if not 0 <= site < len(traj.dims):
        raise ArgumentError(f"no subsystem {site}")
    dots = traj.rho_dots()
    worst = 0.0
    for r, rd in zip(traj.states, dots):
        marg = partial_trace_array(r, traj.dims, [site])
        marg_dot = partial_trace_array(rd, traj.dims, [site])
        dev = np.linalg.norm(marg_dot - apply_generator(local_gen, marg))
        worst = max(worst, float(dev))
    return worst


def markovianity_check_A(traj: Trajectory, local_gen: GeneratorSpec | None = None) -> float:
    """Deviation of subsystem 0 from a fixed local Lindblad generator.

    Without ``local_gen`` the single-qubit generator of the trajectory's bath
    and coupling is used (stored in ``traj.meta`` by the scenario builder).
    """
    if local_gen is None:
        scenario = traj.meta.get("scenario")
        if scenario not in ("cascade", "indirect_qubit", "indirect_oscillator"):
            raise ArgumentError("markovianity check needs a bipartite scenario trajectory")
        if scenario == "cascade":
            local_gen = generator_single(traj.meta["bath"], traj.meta["coupling"])
        else:
            local_gen = GeneratorSpec((2,))
    return markovianity_deviation(traj, 0, local_gen)
