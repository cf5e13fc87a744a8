"""Batched matrix kernels over a finite ring O/pi^m given by lookup tables.

Elements of the finite ring are integer codes; ``add_t[a, b]`` and ``mul_t[a, b]``
are the ring operations.  Every kernel exists twice: a numba ``@njit`` version
and a pure-numpy version.  Set ``CLOSEFIELD_DISABLE_NUMBA=1`` to force the
numpy path (the numba one is used whenever numba imports).
"""
from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("CLOSEFIELD_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:  # pragma: no cover - import guard
    if _DISABLE:
        raise ImportError
    import numba as nb

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    nb = None
    HAVE_NUMBA = False


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


# numpy reference path ---------------------------------------------------------

def _matmul_np(A, B, add_t, mul_t):
    N, n, k = A.shape
    m = B.shape[2]
    out = np.zeros((N, n, m), dtype=np.int64)
    for i in range(n):
        for j in range(m):
            acc = mul_t[A[:, i, 0], B[:, 0, j]]
            for t in range(1, k):
                acc = add_t[acc, mul_t[A[:, i, t], B[:, t, j]]]
            out[:, i, j] = acc
    return out


def _keys_np(M, q):
    N = M.shape[0]
    flat = M.reshape(N, -1)
    key = np.zeros(N, dtype=np.int64)
    for c in range(flat.shape[1]):
        key = key * q + flat[:, c]
    return key


def _det_np(M, add_t, mul_t, neg_t):
    n = M.shape[1]
    if n == 1:
        return M[:, 0, 0].copy()
    if n == 2:
        return add_t[mul_t[M[:, 0, 0], M[:, 1, 1]], neg_t[mul_t[M[:, 0, 1], M[:, 1, 0]]]]
    # cofactor expansion along the first row
    acc = None
    for j in range(n):
        minor = np.delete(np.delete(M, 0, axis=1), j, axis=2)
        term = mul_t[M[:, 0, j], _det_np(minor, add_t, mul_t, neg_t)]
        if j % 2:
            term = neg_t[term]
        acc = term if acc is None else add_t[acc, term]
    return acc


# numba path -------------------------------------------------------------------

if HAVE_NUMBA:

    @nb.njit(cache=True, nogil=True)
    def _matmul_nb(A, B, add_t, mul_t):  # pragma: no cover - compiled
        N, n, k = A.shape
        m = B.shape[2]
        out = np.zeros((N, n, m), dtype=np.int64)
        for b in range(N):
            for i in range(n):
                for j in range(m):
                    acc = mul_t[A[b, i, 0], B[b, 0, j]]
                    for t in range(1, k):
                        acc = add_t[acc, mul_t[A[b, i, t], B[b, t, j]]]
                    out[b, i, j] = acc
        return out

    @nb.njit(cache=True, nogil=True)
    def _keys_nb(M, q):  # pragma: no cover - compiled
        N = M.shape[0]
        n = M.shape[1]
        m = M.shape[2]
        key = np.zeros(N, dtype=np.int64)
        for b in range(N):
            acc = 0
            for i in range(n):
                for j in range(m):
                    acc = acc * q + M[b, i, j]
            key[b] = acc
        return key

    @nb.njit(cache=True, nogil=True)
    def _det2_nb(M, add_t, mul_t, neg_t):  # pragma: no cover - compiled
        N = M.shape[0]
        out = np.empty(N, dtype=np.int64)
        for b in range(N):
            out[b] = add_t[mul_t[M[b, 0, 0], M[b, 1, 1]], neg_t[mul_t[M[b, 0, 1], M[b, 1, 0]]]]
        return out


def batch_matmul(A, B, add_t, mul_t):
    """Products ``A[b] @ B[b]`` over the table ring; either side may be 2-D."""
    A = np.asarray(A, dtype=np.int64)
    B = np.asarray(B, dtype=np.int64)
    if A.ndim == 2 and B.ndim == 2:
        return batch_matmul(A[None], B[None], add_t, mul_t)[0]
    if A.ndim == 2:
        A = np.broadcast_to(A, (B.shape[0],) + A.shape)
    if B.ndim == 2:
        B = np.broadcast_to(B, (A.shape[0],) + B.shape)
    if A.shape[0] == 0:
        return np.zeros((0, A.shape[1], B.shape[2]), dtype=np.int64)
    if HAVE_NUMBA:
        return _matmul_nb(np.ascontiguousarray(A), np.ascontiguousarray(B), add_t, mul_t)
    return _matmul_np(A, B, add_t, mul_t)


def matrix_keys(M, q):
    """Row-major big-endian integer key per matrix; integer order is lex order."""
    M = np.asarray(M, dtype=np.int64)
    if M.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    if HAVE_NUMBA:
        return _keys_nb(np.ascontiguousarray(M), q)
    return _keys_np(M, q)


def batch_det(M, add_t, mul_t, neg_t):
    M = np.asarray(M, dtype=np.int64)
    if HAVE_NUMBA and M.ndim == 3 and M.shape[1] == 2 and M.shape[0]:
        return _det2_nb(np.ascontiguousarray(M), add_t, mul_t, neg_t)
    return _det_np(M, add_t, mul_t, neg_t)


def keys_to_matrices(keys, q, n, m):
    keys = np.asarray(keys, dtype=np.int64).copy()
    out = np.zeros((keys.shape[0], n * m), dtype=np.int64)
    for c in range(n * m - 1, -1, -1):
        out[:, c] = keys % q
        keys //= q
    return out.reshape(-1, n, m)


# forced implementations for benchmarking and cross-checking -------------------

def matmul_numpy(A, B, add_t, mul_t):
    return _matmul_np(np.asarray(A), np.asarray(B), add_t, mul_t)


def matmul_numba(A, B, add_t, mul_t):
    if not HAVE_NUMBA:
        raise RuntimeError("numba backend disabled")
    return _matmul_nb(np.ascontiguousarray(A), np.ascontiguousarray(B), add_t, mul_t)
