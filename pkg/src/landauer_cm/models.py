"""Hamiltonians, interactions and thermal states of the worked examples.

Qubit basis ordering is (|up>, |down>) with sigma_z = diag(1, -1); the free
qubit Hamiltonian (omega/2) sigma_z makes |up> the excited level.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ArgumentError, DomainError
from .hilbert import DensityMatrix, Operator, embed, hermitian_eig, tensor

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
UP = np.array([1, 0], dtype=complex)
DOWN = np.array([0, 1], dtype=complex)


@dataclass(frozen=True)
class BathSpec:
    """Thermal sub-environment qubit: inverse temperature and splitting.

    A negative ``beta`` encodes a population-inverted bath (xi < 0); it is
    only produced through :meth:`from_xi`.
    """

    beta: float
    omega: float = 1.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ArgumentError("omega must be positive")
        if math.isnan(self.beta):
            raise ArgumentError("beta is NaN")

    @classmethod
    def from_xi(cls, xi: float, omega: float = 1.0) -> "BathSpec":
        if not -1.0 <= xi <= 1.0:
            raise ArgumentError("xi must lie in [-1, 1]")
        if abs(xi) == 1.0:
            return cls(math.copysign(math.inf, xi), omega)
        return cls(2.0 * math.atanh(xi) / omega, omega)

    @property
    def xi(self) -> float:
        if math.isinf(self.beta):
            return math.copysign(1.0, self.beta)
        return math.tanh(self.beta * self.omega / 2.0)

    @property
    def inverted(self) -> bool:
        return self.beta < 0

    def hamiltonian(self) -> Operator:
        return qubit_hamiltonian(self.omega)

    def state(self) -> DensityMatrix:
        xi = self.xi
        return DensityMatrix(np.diag([(1 - xi) / 2, (1 + xi) / 2]))


@dataclass(frozen=True)
class CouplingSpec:
    """Rates of the collision model; ``gamma`` is derived as g**2 tau when possible."""

    gamma: float | None = None
    g: float | None = None
    tau: float | None = None
    J: float = 0.0
    gamma_g: float = 0.0

    def __post_init__(self):
        if (self.g is None) != (self.tau is None):
            raise ArgumentError("g and tau must be given together")
        if self.g is not None:
            derived = self.g ** 2 * self.tau
            if self.gamma is not None and not math.isclose(self.gamma, derived,
                                                           rel_tol=1e-12):
                raise ArgumentError(
                    f"gamma={self.gamma} inconsistent with g^2 tau={derived}")
            object.__setattr__(self, "gamma", derived)
        for name in ("gamma", "g", "tau", "gamma_g"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ArgumentError(f"{name} must be non-negative")

    @classmethod
    def from_gamma_tau(cls, gamma: float, tau: float, **kw) -> "CouplingSpec":
        return cls(g=math.sqrt(gamma / tau), tau=tau, **kw)


@dataclass(frozen=True)
class InteractionSpec:
    """V = sum_k S_k (x) R_k with Hermitian factors."""

    s_ops: tuple
    r_ops: tuple

    def __post_init__(self):
        s = tuple(o if isinstance(o, Operator) else Operator(o) for o in self.s_ops)
        r = tuple(o if isinstance(o, Operator) else Operator(o) for o in self.r_ops)
        if len(s) != len(r) or not s:
            raise ArgumentError("s_ops and r_ops must be equal-length and nonempty")
        for op in s + r:
            if not op.is_hermitian():
                raise ArgumentError("interaction factors must be Hermitian")
        object.__setattr__(self, "s_ops", s)
        object.__setattr__(self, "r_ops", r)

    def check_zero_mean(self, eta: Operator, tol: float = 1e-12) -> None:
        for r in self.r_ops:
            m = abs(r.expect(eta))
            if m > tol:
                raise DomainError(f"<R_k>_eta = {m:.3g} is not zero")

    def embedded(self, site: int, dims: Sequence[int]) -> "InteractionSpec":
        """Same interaction with the system factors lifted into a larger space."""
        s = tuple(Operator(embed(o.mat, site, dims), dims) for o in self.s_ops)
        return InteractionSpec(s, self.r_ops)

    def matrix(self) -> Operator:
        """V on system (x) sub-environment."""
        return sum((tensor(s, r) for s, r in zip(self.s_ops, self.r_ops)),
                   start=Operator(np.zeros((self.s_ops[0].dim * self.r_ops[0].dim,) * 2),
                                  self.s_ops[0].dims + self.r_ops[0].dims))


@dataclass(frozen=True)
class FockSpace:
    n_max: int = 20

    def __post_init__(self):
        if self.n_max < 2:
            raise ArgumentError("Fock truncation needs n_max >= 2")

    def destroy(self) -> np.ndarray:
        return np.diag(np.sqrt(np.arange(1, self.n_max)), 1).astype(complex)

    def number(self) -> np.ndarray:
        return np.diag(np.arange(self.n_max)).astype(complex)

    def quadratures(self) -> tuple[np.ndarray, np.ndarray]:
        """q = (b + b^dag)/sqrt2, p = i(b^dag - b)/sqrt2 on the truncated space."""
        b = self.destroy()
        bd = b.conj().T
        return (b + bd) / math.sqrt(2), 1j * (bd - b) / math.sqrt(2)


def qubit_hamiltonian(omega: float) -> Operator:
    return Operator(0.5 * omega * SIGMA_Z)


def oscillator_hamiltonian(omega: float, fock: FockSpace) -> Operator:
    """omega (n + 1/2), resonant with a qubit of splitting omega."""
    return Operator(omega * (fock.number() + 0.5 * np.eye(fock.n_max)))


def thermal_state(h: Operator, beta: float) -> DensityMatrix:
    """Gibbs state of ``h``; beta=+inf gives the normalized ground-space projector."""
    vals, vecs = hermitian_eig(h)
    v = vecs.mat
    if beta == 0:
        w = np.ones_like(vals)
    elif math.isinf(beta):
        target = vals[0] if beta > 0 else vals[-1]
        scale = max(1.0, np.abs(vals).max())
        w = (np.abs(vals - target) <= 1e-12 * scale).astype(float)
    else:
        shifted = -beta * (vals - (vals[0] if beta > 0 else vals[-1]))
        w = np.exp(shifted)
    w = w / w.sum()
    mat = (v * w) @ v.conj().T
    return DensityMatrix(0.5 * (mat + mat.conj().T), h.space)


def xx_interaction() -> InteractionSpec:
    """Isotropic XX coupling sigma_x sigma_x + sigma_y sigma_y."""
    return InteractionSpec((SIGMA_X, SIGMA_Y), (SIGMA_X, SIGMA_Y))


def exchange_interaction_qubit() -> InteractionSpec:
    """sqrt2 (s^- r^+ + s^+ r^-): two-level truncation of the oscillator coupling."""
    c = 1 / math.sqrt(2)
    return InteractionSpec((c * SIGMA_X, c * SIGMA_Y), (SIGMA_X, SIGMA_Y))


def oscillator_bath_interaction(fock: FockSpace) -> InteractionSpec:
    """q sigma_x - p sigma_y = sqrt2 (b r^+ + b^dag r^-), excitation conserving."""
    q, p = fock.quadratures()
    return InteractionSpec((q, p), (SIGMA_X, -SIGMA_Y))


def jaynes_cummings_hamiltonian(omega: float, J: float, fock: FockSpace) -> Operator:
    """Qubit (x) oscillator Hamiltonian with resonant exchange coupling.

    H = (omega/2) sz + omega (n + 1/2) + sqrt2 J (s^+ b + s^- b^dag).
    The coupling equals J (q sx - p sy) for the quadratures of FockSpace.
    """
    n = fock.n_max
    b = fock.destroy()
    free = (np.kron(0.5 * omega * SIGMA_Z, np.eye(n))
            + np.kron(np.eye(2), oscillator_hamiltonian(omega, fock).mat))
    hop = math.sqrt(2) * J * (np.kron(SIGMA_PLUS, b) + np.kron(SIGMA_MINUS, b.conj().T))
    return Operator(free + hop, (2, n))


def exchange_hamiltonian(omega: float, J: float) -> Operator:
    """Two-qubit analogue of the Jaynes-Cummings Hamiltonian (b -> sigma^-)."""
    free = 0.5 * omega * (np.kron(SIGMA_Z, np.eye(2)) + np.kron(np.eye(2), SIGMA_Z))
    hop = math.sqrt(2) * J * (np.kron(SIGMA_PLUS, SIGMA_MINUS)
                              + np.kron(SIGMA_MINUS, SIGMA_PLUS))
    return Operator(free + hop, (2, 2))


def excitation_number(fock: FockSpace | None = None) -> Operator:
    """b^dag b + s^+ s^- on qubit (x) oscillator (or qubit (x) qubit)."""
    if fock is None:
        num_b, d = SIGMA_PLUS @ SIGMA_MINUS, 2
    else:
        num_b, d = fock.number(), fock.n_max
    mat = np.kron(SIGMA_PLUS @ SIGMA_MINUS, np.eye(d)) + np.kron(np.eye(2), num_b)
    return Operator(mat, (2, d))


def collective_jump_operators(n: int) -> tuple[Operator, Operator]:
    """J^+ = sum_k sigma^+_k and J^- on n qubits."""
    if n < 1:
        raise ArgumentError("need at least one qubit")
    dims = (2,) * n
    jp = sum(embed(SIGMA_PLUS, k, dims) for k in range(n))
    jp = Operator(jp, dims)
    return jp, jp.dag()


def local_hamiltonians(dims: Sequence[int], omega: float) -> list[Operator]:
    """Free Hamiltonian of each site: qubit for dim 2, oscillator otherwise."""
    out = []
    for d in dims:
        if d == 2:
            out.append(qubit_hamiltonian(omega))
        else:
            out.append(oscillator_hamiltonian(omega, FockSpace(d)))
    return out


def system_hamiltonian(locals_: Sequence[Operator]) -> Operator:
    dims = tuple(h.dim for h in locals_)
    mat = sum(embed(h.mat, k, dims) for k, h in enumerate(locals_))
    return Operator(mat, dims)


_FOCK_RE = re.compile(r"^fock\((\d+)\)$")


def _local_preset(name: str, h: Operator, bath: BathSpec) -> np.ndarray:
    d = h.dim
    if name == "up":
        if d != 2:
            raise ArgumentError("'up' needs a qubit")
        return np.outer(UP, UP)
    if name == "down":
        if d != 2:
            raise ArgumentError("'down' needs a qubit")
        return np.outer(DOWN, DOWN)
    if name == "thermal":
        if d == 2 and not math.isinf(bath.beta):
            xi = bath.xi
            return np.diag([(1 - xi) / 2, (1 + xi) / 2]).astype(complex)
        return thermal_state(h, bath.beta).mat
    if name == "mixed":
        return np.eye(d) / d
    m = _FOCK_RE.match(name)
    if m:
        k = int(m.group(1))
        if k >= d:
            raise ArgumentError(f"fock({k}) outside a space of {d} levels")
        vec = np.zeros(d, dtype=complex)
        # qubit fock(1) is the excited level |up>
        vec[(1 - k) if d == 2 else k] = 1
        return np.outer(vec, vec)
    raise ArgumentError(f"unknown initial-state preset '{name}'")


def initial_state(spec: str | Sequence[str], dims: Sequence[int], bath: BathSpec,
                  locals_: Sequence[Operator] | None = None) -> DensityMatrix:
    """Named initial state.

    ``spec`` is either one preset for the whole space (``up_up``, ``all_up``,
    ``mixed``, ``thermal``, or a local preset when there is one site) or a
    list with one local preset per site.
    """
    dims = tuple(dims)
    if locals_ is None:
        locals_ = local_hamiltonians(dims, bath.omega)
    if isinstance(spec, str):
        name = spec.strip()
        if name in ("up_up", "all_up"):
            if name == "up_up" and len(dims) != 2:
                raise ArgumentError("'up_up' needs two sites")
            parts = ["up"] * len(dims)
        elif name in ("mixed", "thermal"):
            parts = [name] * len(dims)
        elif len(dims) == 1:
            parts = [name]
        else:
            raise ArgumentError(f"unknown initial-state preset '{name}' for {dims}")
    else:
        parts = [p.strip() for p in spec]
        if len(parts) != len(dims):
            raise ArgumentError("need one local preset per site")
    mats = [_local_preset(p, h, bath) for p, h in zip(parts, locals_)]
    mat = mats[0]
    for m in mats[1:]:
        mat = np.kron(mat, m)
    return DensityMatrix(mat, dims)
