"""Hot loops: Lindblad right-hand side and fixed-step RK4.

Every generator is compiled to the form

    rho_dot = M rho + rho M^dag + sum_m X[m] rho Y[m]

and integrated here. The numba path stores every operator in CSR form, so
each product costs O(nnz * d) instead of O(d^3); the generators of this
package are very sparse (ladder operators, hopping terms). It is used unless
the environment variable ``LANDAUER_CM_NO_NUMBA`` is set to a non-empty value
other than ``0``, or numba is not importable. The numpy path uses dense
products and computes the same arithmetic up to rounding.
"""
from __future__ import annotations

import os

import numpy as np

ENV_FLAG = "LANDAUER_CM_NO_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in ("", "0", "false", "no")


try:
    if not _numba_requested():
        raise ImportError("disabled by " + ENV_FLAG)
    from numba import njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def backend_name() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------- numpy path

def rhs_numpy(M, Md, X, Y, rho):
    out = M @ rho + rho @ Md
    for m in range(X.shape[0]):
        out += (X[m] @ rho) @ Y[m]
    return out


def rk4_numpy(M, X, Y, rho0, dt, n_steps, save_every):
    Md = np.ascontiguousarray(M.conj().T)
    n_save = n_steps // save_every + 1
    out = np.empty((n_save,) + rho0.shape, dtype=np.complex128)
    rho = rho0.copy()
    out[0] = rho
    half = 0.5 * dt
    j = 1
    for step in range(1, n_steps + 1):
        k1 = rhs_numpy(M, Md, X, Y, rho)
        k2 = rhs_numpy(M, Md, X, Y, rho + half * k1)
        k3 = rhs_numpy(M, Md, X, Y, rho + half * k2)
        k4 = rhs_numpy(M, Md, X, Y, rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if step % save_every == 0:
            out[j] = rho
            j += 1
    return out


# ---------------------------------------------------------------- sparse packing

def pack_csr(mats, tol: float = 0.0):
    """Concatenated CSR of a list of square matrices: (data, cols, rowptr).

    Row pointers of matrix k live in rowptr[k*(d+1):(k+1)*(d+1)] and index
    into data/cols directly.
    """
    mats = [np.asarray(m, dtype=np.complex128) for m in mats]
    d = mats[0].shape[0] if mats else 0
    data, cols = [], []
    rowptr = np.zeros(len(mats) * (d + 1), dtype=np.int64)
    pos = 0
    for k, m in enumerate(mats):
        base = k * (d + 1)
        rowptr[base] = pos
        for i in range(d):
            nz = np.nonzero(np.abs(m[i]) > tol)[0]
            data.append(m[i, nz])
            cols.append(nz)
            pos += nz.size
            rowptr[base + i + 1] = pos
    data = np.concatenate(data) if data else np.zeros(0, dtype=np.complex128)
    cols = np.concatenate(cols).astype(np.int64) if cols else np.zeros(0, dtype=np.int64)
    return data, cols, rowptr


def nnz(mat) -> int:
    return int(np.count_nonzero(np.asarray(mat)))


if HAVE_NUMBA:

    @njit(cache=True)
    def _left(data, cols, rowptr, k, rho, out, d):
        # out += A_k rho
        base = k * (d + 1)
        for i in range(d):
            for p in range(rowptr[base + i], rowptr[base + i + 1]):
                v = data[p]
                j = cols[p]
                for c in range(d):
                    out[i, c] += v * rho[j, c]

    @njit(cache=True)
    def _right(data, cols, rowptr, k, rho, out, d):
        # out += rho A_k
        base = k * (d + 1)
        for i in range(d):
            for p in range(rowptr[base + i], rowptr[base + i + 1]):
                v = data[p]
                j = cols[p]
                for r in range(d):
                    out[r, j] += rho[r, i] * v

    @njit(cache=True)
    def _rhs_sparse(data, cols, rowptr, n_terms, rho, out, tmp):
        # slot 0: M, slot 1: M^dag, then X_0, Y_0, X_1, Y_1, ...
        d = rho.shape[0]
        out[:, :] = 0
        _left(data, cols, rowptr, 0, rho, out, d)
        _right(data, cols, rowptr, 1, rho, out, d)
        for m in range(n_terms):
            tmp[:, :] = 0
            _left(data, cols, rowptr, 2 + 2 * m, rho, tmp, d)
            _right(data, cols, rowptr, 3 + 2 * m, tmp, out, d)

    @njit(cache=True)
    def _rk4_sparse(data, cols, rowptr, n_terms, rho0, dt, n_steps, save_every):
        d = rho0.shape[0]
        n_save = n_steps // save_every + 1
        out = np.empty((n_save, d, d), dtype=np.complex128)
        rho = rho0.copy()
        out[0] = rho
        k1 = np.empty((d, d), dtype=np.complex128)
        k2 = np.empty_like(k1)
        k3 = np.empty_like(k1)
        k4 = np.empty_like(k1)
        tmp = np.empty_like(k1)
        half = 0.5 * dt
        j = 1
        for step in range(1, n_steps + 1):
            _rhs_sparse(data, cols, rowptr, n_terms, rho, k1, tmp)
            _rhs_sparse(data, cols, rowptr, n_terms, rho + half * k1, k2, tmp)
            _rhs_sparse(data, cols, rowptr, n_terms, rho + half * k2, k3, tmp)
            _rhs_sparse(data, cols, rowptr, n_terms, rho + dt * k3, k4, tmp)
            rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if step % save_every == 0:
                out[j] = rho
                j += 1
        return out


def _pack_generator(M, X, Y):
    mats = [M, M.conj().T]
    for x, y in zip(X, Y):
        mats.extend((x, y))
    return pack_csr(mats) + (len(X),)


def _prepare(M, X, Y, rho0):
    M = np.ascontiguousarray(M, dtype=np.complex128)
    X = np.ascontiguousarray(X, dtype=np.complex128)
    Y = np.ascontiguousarray(Y, dtype=np.complex128)
    rho0 = np.ascontiguousarray(rho0, dtype=np.complex128)
    return M, X, Y, rho0


def _resolve(use_numba):
    if use_numba is None:
        return HAVE_NUMBA
    if use_numba and not HAVE_NUMBA:
        raise RuntimeError("numba backend unavailable")
    return bool(use_numba)


def rhs(M, X, Y, rho, use_numba=None):
    """rho_dot for one state."""
    M, X, Y, rho = _prepare(M, X, Y, rho)
    if _resolve(use_numba):
        data, cols, rowptr, n_terms = _pack_generator(M, X, Y)
        out = np.empty_like(rho)
        _rhs_sparse(data, cols, rowptr, n_terms, rho, out, np.empty_like(rho))
        return out
    return rhs_numpy(M, np.ascontiguousarray(M.conj().T), X, Y, rho)


def rhs_many(M, X, Y, states, use_numba=None):
    """rho_dot for a stack of states."""
    M, X, Y, states = _prepare(M, X, Y, states)
    out = np.empty_like(states)
    if _resolve(use_numba):
        data, cols, rowptr, n_terms = _pack_generator(M, X, Y)
        tmp = np.empty_like(states[0])
        for i in range(states.shape[0]):
            _rhs_sparse(data, cols, rowptr, n_terms, states[i], out[i], tmp)
        return out
    Md = np.ascontiguousarray(M.conj().T)
    for i in range(states.shape[0]):
        out[i] = rhs_numpy(M, Md, X, Y, states[i])
    return out


def rk4_integrate(M, X, Y, rho0, dt, n_steps, save_every=1, use_numba=None):
    """Integrate with classical RK4; returns the states at every ``save_every`` step."""
    if save_every < 1 or n_steps % save_every:
        raise ValueError("n_steps must be a positive multiple of save_every")
    M, X, Y, rho0 = _prepare(M, X, Y, rho0)
    if _resolve(use_numba):
        data, cols, rowptr, n_terms = _pack_generator(M, X, Y)
        return _rk4_sparse(data, cols, rowptr, n_terms, rho0, float(dt), int(n_steps),
                           int(save_every))
    return rk4_numpy(M, X, Y, rho0, float(dt), int(n_steps), int(save_every))
