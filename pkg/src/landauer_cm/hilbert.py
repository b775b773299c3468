"""Dense operators on tensor-product spaces, partial traces and entropies.

All entropies are in nats.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import ArgumentError, DomainError

TOL_HERM = 1e-9
TOL_TRACE = 1e-9
TOL_POS = 1e-8
TOL_UNIT = 1e-10
EPS_EIG = 1e-12

_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


@dataclass(frozen=True)
class SpaceShape:
    """Ordered local dimensions of a tensor-product space."""

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise ArgumentError(f"invalid local dimensions {self.dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def total(self) -> int:
        return int(np.prod(self.dims))

    def __len__(self):
        return len(self.dims)

    def check_indices(self, indices: Iterable[int]) -> tuple[int, ...]:
        idx = tuple(sorted(set(int(i) for i in indices)))
        for i in idx:
            if not 0 <= i < len(self.dims):
                raise ArgumentError(
                    f"subsystem index {i} out of range for dims {self.dims}")
        return idx

    def restrict(self, keep: Sequence[int]) -> "SpaceShape":
        return SpaceShape(tuple(self.dims[i] for i in keep))


class Operator:
    """Square complex matrix with a tensor-product structure attached.

    The matrix is stored read-only; arithmetic returns new operators.
    """

    __slots__ = ("mat", "space")

    def __init__(self, mat, dims: Sequence[int] | SpaceShape | None = None):
        mat = np.array(mat, dtype=np.complex128)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ArgumentError(f"operator must be square, got shape {mat.shape}")
        if dims is None:
            space = SpaceShape((mat.shape[0],))
        elif isinstance(dims, SpaceShape):
            space = dims
        else:
            space = SpaceShape(tuple(dims))
        if space.total != mat.shape[0]:
            raise ArgumentError(
                f"dims {space.dims} do not match matrix size {mat.shape[0]}")
        mat.flags.writeable = False
        self.mat = mat
        self.space = space

    @property
    def dims(self) -> tuple[int, ...]:
        return self.space.dims

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def dag(self) -> "Operator":
        return Operator(self.mat.conj().T, self.space)

    def tr(self) -> complex:
        return complex(np.trace(self.mat))

    def is_hermitian(self, tol: float = TOL_HERM) -> bool:
        return hermiticity_error(self.mat) <= tol * max(1.0, np.abs(self.mat).max())

    def expect(self, rho: "Operator") -> complex:
        return complex(np.trace(self.mat @ rho.mat))

    def _coerce(self, other):
        if isinstance(other, Operator):
            if other.dims != self.dims:
                raise ArgumentError(f"dims mismatch {self.dims} vs {other.dims}")
            return other.mat
        return other

    def __add__(self, other):
        return Operator(self.mat + self._coerce(other), self.space)

    __radd__ = __add__

    def __sub__(self, other):
        return Operator(self.mat - self._coerce(other), self.space)

    def __neg__(self):
        return Operator(-self.mat, self.space)

    def __mul__(self, scalar):
        if isinstance(scalar, Operator):
            return NotImplemented
        return Operator(self.mat * scalar, self.space)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Operator(self.mat / scalar, self.space)

    def __matmul__(self, other):
        return Operator(self.mat @ self._coerce(other), self.space)

    def __repr__(self):
        return f"Operator(dims={self.dims})"


class DensityMatrix(Operator):
    """Hermitian, unit-trace, positive semidefinite operator."""

    __slots__ = ()

    def __init__(self, mat, dims=None, check: bool = True):
        super().__init__(mat, dims)
        if check:
            validate_state(self.mat)

    @classmethod
    def from_operator(cls, op: Operator, check: bool = True) -> "DensityMatrix":
        return cls(op.mat, op.space, check=check)

    def __repr__(self):
        return f"DensityMatrix(dims={self.dims})"


def hermiticity_error(mat: np.ndarray) -> float:
    return float(np.abs(mat - mat.conj().T).max())


def validate_state(mat: np.ndarray, tol_herm=TOL_HERM, tol_trace=TOL_TRACE,
                   tol_pos=TOL_POS) -> None:
    if hermiticity_error(mat) > tol_herm:
        raise DomainError(f"state not Hermitian (error {hermiticity_error(mat):.3g})")
    tr = np.trace(mat).real
    if abs(tr - 1.0) > tol_trace:
        raise DomainError(f"state trace {tr!r} differs from 1")
    lmin = np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))[0]
    if lmin < -tol_pos:
        raise DomainError(f"state has negative eigenvalue {lmin:.3g}")


def tensor(*ops: Operator) -> Operator:
    """Kronecker product; the result carries the concatenated dims."""
    if len(ops) == 1 and not isinstance(ops[0], Operator):
        ops = tuple(ops[0])
    mat = reduce(np.kron, [o.mat for o in ops])
    dims = sum((o.dims for o in ops), ())
    if all(isinstance(o, DensityMatrix) for o in ops):
        return DensityMatrix(mat, dims, check=False)
    return Operator(mat, dims)


def embed(local: np.ndarray, site: int, dims: Sequence[int]) -> np.ndarray:
    """Matrix of ``local`` acting on subsystem ``site`` of the space ``dims``."""
    left = int(np.prod(dims[:site]))
    right = int(np.prod(dims[site + 1:]))
    return np.kron(np.kron(np.eye(left), local), np.eye(right))


def partial_trace_array(mat: np.ndarray, dims: Sequence[int],
                        keep: Sequence[int]) -> np.ndarray:
    n = len(dims)
    keep = sorted(keep)
    if len(keep) == n:
        return np.array(mat)
    row = list(_LETTERS[:n])
    col = list(_LETTERS[n:2 * n])
    for i in range(n):
        if i not in keep:
            col[i] = row[i]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    spec = "".join(row) + "".join(col) + "->" + out
    d = int(np.prod([dims[i] for i in keep]))
    return np.einsum(spec, mat.reshape(tuple(dims) * 2)).reshape(d, d)


def partial_trace(rho: Operator, keep: Iterable[int]) -> Operator:
    """Trace out every subsystem not listed in ``keep``."""
    keep = rho.space.check_indices(keep)
    if not keep:
        raise ArgumentError("keep must name at least one subsystem")
    mat = partial_trace_array(rho.mat, rho.dims, keep)
    space = rho.space.restrict(keep)
    if isinstance(rho, DensityMatrix):
        return DensityMatrix(mat, space, check=False)
    return Operator(mat, space)


def hermitian_eig(op: Operator | np.ndarray):
    """Ascending eigenvalues and the unitary of eigenvectors (as columns)."""
    mat = op.mat if isinstance(op, Operator) else np.asarray(op, dtype=complex)
    if hermiticity_error(mat) > TOL_HERM * max(1.0, np.abs(mat).max()):
        raise ArgumentError("hermitian_eig requires a Hermitian operator")
    vals, vecs = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    if isinstance(op, Operator):
        return vals, Operator(vecs, op.space)
    return vals, vecs


def unitary_from_hamiltonian(h: Operator, t: float) -> Operator:
    """exp(-i h t) via the spectral decomposition of h."""
    vals, vecs = hermitian_eig(h)
    v = vecs.mat
    return Operator((v * np.exp(-1j * vals * t)) @ v.conj().T, h.space)


def _as_array(rho) -> np.ndarray:
    return rho.mat if isinstance(rho, Operator) else np.asarray(rho)


def entropy_of_spectrum(vals: np.ndarray, eps: float = EPS_EIG) -> float:
    p = vals[vals > eps]
    return float(-np.sum(p * np.log(p)))


def von_neumann_entropy(rho) -> float:
    mat = _as_array(rho)
    return entropy_of_spectrum(np.linalg.eigvalsh(0.5 * (mat + mat.conj().T)))


def relative_entropy(rho, sigma, eps: float = EPS_EIG) -> float:
    """Tr[rho ln rho] - Tr[rho ln sigma]; raises DomainError on support violation."""
    r = _as_array(rho)
    s = _as_array(sigma)
    lr, vr = np.linalg.eigh(0.5 * (r + r.conj().T))
    ls, vs = np.linalg.eigh(0.5 * (s + s.conj().T))
    weights = np.real(np.einsum("ji,jk,ki->i", vs.conj(), r, vs))
    outside = ls <= eps
    if np.any(weights[outside] > eps):
        raise DomainError("support of rho is not contained in support of sigma")
    pr = lr[lr > eps]
    term_rr = float(np.sum(pr * np.log(pr)))
    term_rs = float(np.sum(weights[~outside] * np.log(ls[~outside])))
    return term_rr - term_rs


def _check_partition(space: SpaceShape, part_a, part_b):
    a = space.check_indices(part_a)
    b = space.check_indices(part_b)
    if not a or not b:
        raise ArgumentError("both sides of a partition must be nonempty")
    if set(a) & set(b):
        raise ArgumentError("partition blocks overlap")
    if set(a) | set(b) != set(range(len(space))):
        raise ArgumentError("partition must cover every subsystem")
    return a, b


def _space_of(rho, dims) -> SpaceShape:
    if isinstance(rho, Operator):
        return rho.space
    if dims is None:
        raise ArgumentError("dims required for a bare array")
    return SpaceShape(tuple(dims))


def marginal_entropy(rho, keep, dims=None) -> float:
    space = _space_of(rho, dims)
    keep = space.check_indices(keep)
    return von_neumann_entropy(partial_trace_array(_as_array(rho), space.dims, keep))


def mutual_information(rho, partition, dims=None) -> float:
    """S(A) + S(B) - S(AB) for a partition (A-indices, B-indices)."""
    space = _space_of(rho, dims)
    a, b = _check_partition(space, *partition)
    mat = _as_array(rho)
    return (marginal_entropy(mat, a, space.dims) + marginal_entropy(mat, b, space.dims)
            - von_neumann_entropy(mat))


def conditional_entropy(rho, given, dims=None) -> float:
    """S(full) - S(marginal on ``given``), the standard conditional entropy."""
    space = _space_of(rho, dims)
    given = space.check_indices(given)
    if not given or len(given) == len(space):
        raise ArgumentError("conditioning set must be a proper nonempty subset")
    mat = _as_array(rho)
    return von_neumann_entropy(mat) - marginal_entropy(mat, given, space.dims)


def correlation_information(rho, dims=None) -> float:
    """Sum of single-site entropies minus the joint entropy."""
    space = _space_of(rho, dims)
    mat = _as_array(rho)
    return (sum(marginal_entropy(mat, [i], space.dims) for i in range(len(space)))
            - von_neumann_entropy(mat))


def trace_distance(a, b) -> float:
    diff = _as_array(a) - _as_array(b)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def random_density_matrix(dims: Sequence[int], rng: np.random.Generator,
                          rank: int | None = None) -> DensityMatrix:
    """Random full-rank (or fixed-rank) state; used by property tests."""
    d = int(np.prod(dims))
    k = d if rank is None else rank
    g = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    mat = g @ g.conj().T
    return DensityMatrix(mat / np.trace(mat).real, dims)


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (g + g.conj().T)
