"""The finite rings O/pi^m as lookup tables over big-endian digit codes.

A code is the integer ``d_0 p^(m-1) + ... + d_(m-1)``, so integer order is the
lexicographic digit order; a code is a unit exactly when it is >= p^(m-1).
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from . import _kernels as K
from .local_ring import INF, PadicDigits, RingSpec

MAX_TABLE = 1 << 11


def _decode(codes, p, m):
    codes = np.asarray(codes, dtype=np.int64)
    out = np.zeros(codes.shape + (m,), dtype=np.int64)
    c = codes.copy()
    for i in range(m - 1, -1, -1):
        out[..., i] = c % p
        c //= p
    return out


def _encode(digs, p):
    m = digs.shape[-1]
    c = np.zeros(digs.shape[:-1], dtype=np.int64)
    for i in range(m):
        c = c * p + digs[..., i]
    return c


def _carry_vec(spec, coeffs):
    p = spec.p
    m = coeffs.shape[-1]
    if spec.e == INF:
        return coeffs % p
    e = spec.e
    c = coeffs.copy()
    for i in range(m):
        d = c[..., i] % p
        carry = (c[..., i] - d) // p
        c[..., i] = d
        if i + e < m:
            c[..., i + e] += carry
    return c


class FiniteRing:
    """O/pi^m for a ring spec, with add/mul/neg/inverse tables."""

    def __init__(self, spec: RingSpec, m: int):
        if m < 1:
            raise ValueError("modulus exponent must be >= 1")
        q = spec.p ** m
        if q > MAX_TABLE:
            raise ValueError(f"O/pi^{m} has {q} elements, above the table limit {MAX_TABLE}")
        self.spec = spec
        self.m = m
        self.q = q
        p = spec.p
        digs = _decode(np.arange(q), p, m)
        a = digs[:, None, :]
        b = digs[None, :, :]
        self.add_t = _encode(_carry_vec(spec, a + b), p)
        self.neg_t = _encode(_carry_vec(spec, -digs), p)
        prod = np.zeros((q, q, m), dtype=np.int64)
        for i in range(m):
            for j in range(m - i):
                prod[:, :, i + j] += a[:, :, i] * b[:, :, j]
        self.mul_t = _encode(_carry_vec(spec, prod), p)
        self.unit_floor = p ** (m - 1)
        inv_t = np.full(q, -1, dtype=np.int64)
        units = np.arange(self.unit_floor, q)
        rows, cols = np.nonzero(self.mul_t[np.ix_(units, units)] == self.one)
        inv_t[units[rows]] = units[cols]
        self.inv_t = inv_t

    @property
    def one(self) -> int:
        return self.spec.p ** (self.m - 1)

    def code(self, x: PadicDigits) -> int:
        return x.code(self.m)

    def element(self, c: int, prec: int | None = None) -> PadicDigits:
        return PadicDigits.from_code(self.spec, int(c), self.m, 0, self.m if prec is None else prec)

    def pi_power(self, k: int) -> int:
        if k >= self.m:
            return 0
        return self.spec.p ** (self.m - 1 - k)

    def units(self):
        return np.arange(self.unit_floor, self.q)

    def is_unit(self, codes):
        return np.asarray(codes) >= self.unit_floor

    def matmul(self, A, B):
        return K.batch_matmul(A, B, self.add_t, self.mul_t)

    def det(self, M):
        return K.batch_det(M, self.add_t, self.mul_t, self.neg_t)

    def keys(self, M):
        return K.matrix_keys(M, self.q)

    def from_keys(self, keys, n, m=None):
        return K.keys_to_matrices(keys, self.q, n, n if m is None else m)

    def identity(self, n):
        return np.eye(n, dtype=np.int64) * self.one

    def mat_inv(self, M):
        """Inverse of a single invertible code matrix by Gauss-Jordan over the tables."""
        M = np.array(M, dtype=np.int64)
        n = M.shape[0]
        A = np.concatenate([M, self.identity(n)], axis=1)
        for col in range(n):
            piv = next((r for r in range(col, n) if A[r, col] >= self.unit_floor), None)
            if piv is None:
                raise ValueError("matrix is not invertible over O/pi^m")
            A[[col, piv]] = A[[piv, col]]
            A[col] = self.mul_t[self.inv_t[A[col, col]], A[col]]
            for r in range(n):
                if r != col and A[r, col]:
                    f = self.neg_t[A[r, col]]
                    A[r] = self.add_t[A[r], self.mul_t[f, A[col]]]
        return A[:, n:]


@lru_cache(maxsize=64)
def finite_ring(spec: RingSpec, m: int) -> FiniteRing:
    return FiniteRing(spec, m)
