"""Brute-force oracles over finite quotients, independent of the canonical-form code.

Points are compared through integral finite images:

* DIAGONAL: the point matrix X, scaled by pi^w to be integral, reduced mod pi^N
  with N = max(level, 1) + w + v, where v bounds the denominators of X^-1.
  If a K_level-translate of X agrees with Y mod pi^(N-w), then Y = u . X with
  u = 1 + pi^(N-w) E X^-1 in K_level.
* SYMMETRIC: the projector Q = g diag(I_n, 0) g^-1, scaled likewise, under
  conjugation, with N = max(level, 1) + 2w; for idempotents Q, Q' the element
  1 + (Q' - Q)(2Q - 1) conjugates Q to Q' and lies in K_level once they agree
  modulo pi^(level + w).
"""
from __future__ import annotations

import itertools

import numpy as np

from .coset_enum import DEFAULT_BUDGET, congruence_generators, gl_elements, orbit_closure_batch
from .dvr_linalg import MatF, elementary_divisor_sums, matinv, matmul, reduce_mod
from .finite_ring import finite_ring
from .spherical_pairs import PairDescriptor, iota, projector


def _embedding(pair: PairDescriptor, X: MatF) -> MatF:
    return projector(X, pair.n) if pair.kind == "sym" else X


def oracle_modulus(pair: PairDescriptor, X: MatF, level: int):
    """(w, N): scaling exponent and finite modulus that decide K_level-orbits near X."""
    E = _embedding(pair, X)
    mv = E.min_val()
    w = -min(0, mv if mv is not None else 0)
    if pair.kind == "sym":
        return w, max(level, 1) + 2 * w
    Xi = matinv(X)
    vi = Xi.min_val()
    v = max(0, -(vi if vi is not None else 0))
    return w, max(level, 1) + w + v


def finite_image(pair: PairDescriptor, X: MatF, w: int, N: int) -> np.ndarray:
    E = _embedding(pair, X).shifted(w)
    return reduce_mod(E, N)


def orbit_moves(pair: PairDescriptor, spec, level: int, N: int):
    R = finite_ring(spec, N)
    if pair.kind == "sym":
        gens = congruence_generators(pair.point_dim, spec, level, N)
        invs = [R.mat_inv(g) for g in gens]
        return R, [(lambda A, g=g, gi=gi: R.matmul(R.matmul(g, A), gi)) for g, gi in zip(gens, invs)]
    n = pair.n
    left = congruence_generators(n + 1, spec, level, N)
    right = congruence_generators(n, spec, level, N)
    I1 = np.zeros((n + 1, n + 1), dtype=np.int64)
    moves = [(lambda A, g=g: R.matmul(g, A)) for g in left]
    for g in right:
        big = I1.copy()
        big[0, 0] = R.one
        big[1:, 1:] = g
        moves.append(lambda A, big=big: R.matmul(A, big))
    return R, moves


def finite_orbit(pair: PairDescriptor, X: MatF, level: int, w=None, N=None, budget=DEFAULT_BUDGET):
    """Sorted keys of the finite K_level-orbit image of the point X."""
    if w is None:
        w, N = oracle_modulus(pair, X, level)
    R, moves = orbit_moves(pair, X.spec, level, N)
    x = finite_image(pair, X, w, N)
    orb = orbit_closure_batch(x[None], moves, R.keys, budget)
    return R.keys(orb)


def same_orbit(pair: PairDescriptor, X: MatF, Y: MatF, level: int, budget=DEFAULT_BUDGET) -> bool:
    w1, N1 = oracle_modulus(pair, X, level)
    w2, N2 = oracle_modulus(pair, Y, level)
    if w1 != w2:
        return False
    N = max(N1, N2)
    orb = finite_orbit(pair, X, level, w1, N, budget)
    R = finite_ring(X.spec, N)
    y = R.keys(finite_image(pair, Y, w1, N)[None])[0]
    return bool(np.isin(y, orb))


def brute_stabilizer(pair: PairDescriptor, delta, level: int, spec, budget=DEFAULT_BUDGET):
    """All kappa in K_0/K_level (per factor codes) with kappa . rep_delta in K_level . rep_delta."""
    X = pair.rep(delta, spec)
    w, N = oracle_modulus(pair, X, level)
    orb = finite_orbit(pair, X, level, w, N, budget)
    R = finite_ring(spec, N)
    factors = [gl_elements(d, spec, level, budget) for d in pair.group_dims]
    out = []
    for combo in itertools.product(*[range(len(f)) for f in factors]):
        kappa = tuple(MatF.from_codes(spec, factors[i][c], level, 24) for i, c in enumerate(combo))
        Y = pair.act(kappa, X)
        y = R.keys(finite_image(pair, Y, w, N)[None])[0]
        if np.isin(y, orb):
            out.append(tuple(factors[i][c] for i, c in enumerate(combo)))
    return out


def symmetric_invariant(g: MatF, pair: PairDescriptor):
    """K_0-orbit invariant of gH: the k smallest elementary divisors of the projector, clipped at 0."""
    Q = projector(g, pair.n)
    sums = elementary_divisor_sums(Q)
    divs = [sums[0]] + [None if (b is None or a is None) else b - a for a, b in zip(sums, sums[1:])]
    divs = [d for d in divs if d is not None]
    return tuple(min(d, 0) for d in divs[: pair.k])
