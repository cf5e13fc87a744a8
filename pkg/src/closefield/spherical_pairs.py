"""The two spherical pairs: canonical forms, stabilizers, factorizations.

SYMMETRIC(n, k), k <= n:  G = GL_{n+k}, H = GL_n x GL_k (first n and last k
coordinates).  A point is a coset gH, stored through a representative g.  The
block layout used throughout is (k, n-k, k), and the canonical representative
of the cell mu (mu_1 <= ... <= mu_k <= 0) is

    rep_mu = [[I_k, 0, pi^mu], [0, I_{n-k}, 0], [0, 0, I_k]].

DIAGONAL(n):  G = GL_{n+1} x GL_n, H = GL_n diagonally.  G/H is identified with
GL_{n+1} via (g, h) -> g iota(h)^-1, with iota(h) = diag(1, h), so that
(k1, k2) acts on a point X by X -> k1 X iota(k2)^-1.  Cells are labelled by
delta = (a, b_1..b_n, c_1..c_n) with representative

    rep_delta = [[pi^a, pi^b_1 ... pi^b_n], [0, diag(pi^c)]] = pi^lambda x0.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .coset_enum import DEFAULT_BUDGET, _check_budget, gl_elements
from .dvr_linalg import (
    MatF,
    block_diag,
    cartan,
    in_congruence,
    lu_congruence,
    matinv,
    matmul,
    reduce_mod,
    smith,
)
from .errors import NoSolution, NotInCongruenceSubgroup, NotInNeighborhood, ParseError, PrecisionLoss
from .finite_ring import finite_ring
from .local_ring import PadicDigits, RingSpec, add, inv, mul, neg, sub

WORK_PREC = 24
CANON_FLOOR = 12  # minimum working precision inside canonicalization
STEP_BUDGET = 10_000


# descriptors -------------------------------------------------------------------------

@dataclass(frozen=True)
class PairDescriptor:
    kind: str  # "sym" or "diag"
    n: int
    k: int = 0

    def __post_init__(self):
        if self.kind not in ("sym", "diag"):
            raise ParseError(f"unknown pair kind {self.kind!r}")
        if self.n < 1 or (self.kind == "sym" and not 1 <= self.k <= self.n):
            raise ParseError(f"bad pair dimensions in {self}")

    @classmethod
    def parse(cls, text: str) -> "PairDescriptor":
        try:
            kind, dims = text.strip().split(":")
            if kind == "sym":
                n, k = (int(x) for x in dims.split(","))
                return cls("sym", n, k)
            if kind == "diag":
                return cls("diag", int(dims))
        except ValueError as exc:
            raise ParseError(f"bad pair {text!r}: {exc}") from exc
        raise ParseError(f"bad pair {text!r}")

    def __str__(self):
        return f"sym:{self.n},{self.k}" if self.kind == "sym" else f"diag:{self.n}"

    @property
    def group_dims(self) -> tuple:
        return (self.n + self.k,) if self.kind == "sym" else (self.n + 1, self.n)

    @property
    def point_dim(self) -> int:
        return self.n + self.k if self.kind == "sym" else self.n + 1

    def zero_delta(self) -> tuple:
        return (0,) * (self.k if self.kind == "sym" else 2 * self.n + 1)

    def in_cone(self, delta) -> bool:
        delta = tuple(delta)
        if self.kind == "sym":
            return len(delta) == self.k and all(x <= y for x, y in zip(delta, delta[1:])) and delta[-1] <= 0
        return satisfies_singular_value_constraints(delta, self.n)

    def rep(self, delta, spec: RingSpec, prec: int = WORK_PREC) -> MatF:
        """Canonical representative matrix of the cell delta."""
        delta = tuple(delta)
        if self.kind == "sym":
            n, k = self.n, self.k
            N = n + k
            rows = [[PadicDigits.from_int(spec, int(i == j), prec) for j in range(N)] for i in range(N)]
            for i in range(k):
                rows[i][n + i] = PadicDigits.pi_power(spec, delta[i], prec)
            return MatF(rows)
        a, b, c = split_delta(delta, self.n)
        n = self.n
        z = PadicDigits.zero(spec, prec)
        rows = [[z] * (n + 1) for _ in range(n + 1)]
        rows[0][0] = PadicDigits.pi_power(spec, a, prec)
        for j in range(n):
            rows[0][j + 1] = PadicDigits.pi_power(spec, b[j], prec)
            rows[j + 1][j + 1] = PadicDigits.pi_power(spec, c[j], prec)
        return MatF(rows)

    def x0(self, spec: RingSpec, prec: int = WORK_PREC) -> MatF:
        return self.rep(self.zero_delta(), spec, prec)

    def act(self, elems, X: MatF) -> MatF:
        """Group element (tuple of factor matrices) acting on a point matrix."""
        if self.kind == "sym":
            return matmul(elems[0], X)
        a, b = elems
        return matmul(matmul(a, X), iota(matinv(b)))

    def modulus(self, delta, level: int) -> int:
        ex = delta_exponents(self, delta)
        return level + max(max(ex), 0) - min(min(ex), 0)


def delta_exponents(pair: PairDescriptor, delta) -> tuple:
    return tuple(delta) if pair.kind == "sym" else tuple(delta)


def split_delta(delta, n):
    delta = tuple(delta)
    if len(delta) == 3 and not isinstance(delta[1], int):
        return delta[0], tuple(delta[1]), tuple(delta[2])
    if len(delta) != 2 * n + 1:
        raise NoSolution(f"delta {delta} has the wrong length for n={n}")
    return delta[0], tuple(delta[1 : n + 1]), tuple(delta[n + 1 :])


def flat_delta(a, b, c) -> tuple:
    return (int(a),) + tuple(int(x) for x in b) + tuple(int(x) for x in c)


def satisfies_singular_value_constraints(delta, n) -> bool:
    a, b, c = split_delta(delta, n)
    for i in range(n):
        for j in range(i + 1, n):
            if not (c[i] - c[j] <= b[i] - b[j] <= 0):
                return False
    return b[0] <= c[0]


def delta_to_lambda(delta, n: int):
    """(a, b, c) -> (mu, nu) with rep_delta = pi^(mu, nu) x0."""
    if not satisfies_singular_value_constraints(delta, n):
        raise NoSolution(f"delta {tuple(delta)} violates the normal-form constraints")
    a, b, c = split_delta(delta, n)
    nu = tuple(a - bj for bj in b)
    mu = (a,) + tuple(c[j] + nu[j] for j in range(n))
    return mu, nu


def lambda_to_delta(mu, nu) -> tuple:
    mu, nu = tuple(mu), tuple(nu)
    n = len(nu)
    if len(mu) != n + 1:
        raise NoSolution("mu must have one more entry than nu")
    if any(x > y for x, y in zip(mu, mu[1:])) or any(x < y for x, y in zip(nu, nu[1:])):
        raise NoSolution(f"({mu}, {nu}) is not in the positive chamber")
    a = mu[0]
    return flat_delta(a, [a - x for x in nu], [mu[j + 1] - nu[j] for j in range(n)])


def iota(b: MatF) -> MatF:
    one = PadicDigits.one(b.spec, b.prec)
    return block_diag(MatF([[one]]), b)


# canonical forms -------------------------------------------------------------------------

def _lift(g: MatF, W: int) -> MatF:
    return g.with_prec(max(W, g.prec))


def _triangularize(g: MatF):
    """k_tri in GL(O) with k_tri g upper triangular (min-valuation pivot per column)."""
    N = g.n
    spec = g.spec
    W = g.prec
    a = [list(r) for r in g.rows]
    K = [[PadicDigits.from_int(spec, int(i == j), W) for j in range(N)] for i in range(N)]
    for col in range(N):
        best = None
        for r in range(col, N):
            x = a[r][col]
            if x.digits and (best is None or x.shift < a[best][col].shift):
                best = r
        if best is None:
            raise PrecisionLoss("matrix is singular at working precision", required=g.prec + 1)
        a[col], a[best] = a[best], a[col]
        K[col], K[best] = K[best], K[col]
        p = a[col][col]
        for r in range(col + 1, N):
            x = a[r][col]
            if x.digits:
                f = neg(mul(x, inv(p.unit_part())).shifted(-p.shift))
                a[r] = [add(y, mul(f, z)) for y, z in zip(a[r], a[col])]
                K[r] = [add(y, mul(f, z)) for y, z in zip(K[r], K[col])]
    return MatF(K), MatF(a)


def canon_symmetric(g: MatF, pair: PairDescriptor):
    """(mu, k_w, h_w) with k_w g h_w = rep_mu, k_w in GL_{n+k}(O), h_w in H."""
    n, k = pair.n, pair.k
    if g.shape != (n + k, n + k):
        raise ValueError(f"expected a {(n + k)}x{(n + k)} matrix")
    spec = g.spec
    W = max(g.prec, CANON_FLOOR)
    g = _lift(g, W)
    k_tri, T = _triangularize(g)
    T11 = T.block(0, n, 0, n)
    T12 = T.block(0, n, n, n + k)
    T22 = T.block(n, n + k, n, n + k)
    T11i = matinv(T11)
    T22i = matinv(T22)
    A = matmul(T12, T22i)  # n x k
    sf = smith(A)
    S1i = matinv(sf.k1)  # k1 = S1^-1 acts on the left
    lam = sf.lam
    mu = tuple(min(x, 0) if x is not None else 0 for x in lam)
    # A' = S1^-1 A S2^-1 = [diag(pi^lam); 0]; correction to [diag(pi^mu); 0]
    P = MatF.zeros(spec, n, k, W).tolist()
    for i in range(k):
        lam_i = lam[i]
        cur = PadicDigits.pi_power(spec, lam_i, W) if lam_i is not None else PadicDigits.zero(spec, W)
        P[i][i] = sub(PadicDigits.pi_power(spec, mu[i], W), cur)
    I_n = MatF.identity(spec, n, W)
    I_k = MatF.identity(spec, k, W)
    Zkn = MatF.zeros(spec, k, n, W)
    k_c = _blocks2(I_n, MatF(P), Zkn, I_k)
    conj = block_diag(S1i, sf.k2)
    k_w = matmul(matmul(k_c, conj), k_tri)
    h_w = matmul(block_diag(T11i, T22i), matinv(conj))
    return mu, k_w, h_w


def _blocks2(A, B, C, D) -> MatF:
    from .dvr_linalg import block_matrix

    return block_matrix([[A, B], [C, D]])


def canon_diagonal(X: MatF, pair: PairDescriptor, step_budget: int = STEP_BUDGET):
    """(delta, k1, k2) with k1 X iota(k2) = rep_delta."""
    n = pair.n
    if X.shape != (n + 1, n + 1):
        raise ValueError(f"expected a {(n + 1)}x{(n + 1)} matrix")
    spec = X.spec
    W = max(X.prec, CANON_FLOOR)
    w = _Work2(_lift(X, W))
    # first column -> (pi^a, 0, ..., 0)
    col = [w.a[r][0] for r in range(n + 1)]
    piv = min((r for r in range(n + 1) if col[r].digits), key=lambda r: col[r].shift, default=None)
    if piv is None:
        raise PrecisionLoss("first column indistinguishable from zero", required=X.prec + 1)
    w.swap_rows(0, piv)
    w.scale_row(0, inv(w.a[0][0].unit_part()))
    a = w.a[0][0].shift
    for r in range(1, n + 1):
        x = w.a[r][0]
        if x.digits:
            w.add_row(r, 0, neg(x.shifted(-a)))
    # Cartan on the lower-right block
    C = MatF([row[1:] for row in w.a[1:]])
    cf = cartan(C)
    w.left(iota(matinv(cf.k1)))
    w.right(iota(matinv(cf.k2)))
    c = list(cf.lam)
    # exact diagonal after units are absorbed
    for j in range(n):
        x = w.a[j + 1][j + 1]
        if x.digits and x.shift == c[j]:
            w.scale_row(j + 1, inv(x.unit_part()))
    for r in range(1, n + 1):
        for cc in range(1, n + 1):
            if r != cc:
                w.a[r][cc] = PadicDigits.zero(spec, W)
    b = _normalize_b(w, n, c, spec, W)
    steps = 0
    while True:
        move = _find_move(b, c, n)
        if move is None:
            break
        steps += 1
        if steps > step_budget:
            raise PrecisionLoss("normal-form rewriting did not terminate within the step budget")
        kind, i, j = move
        if kind == "M1":
            # b_i > b_j, i < j: col_i += col_j, row_j -= pi^(c_j - c_i) row_i
            w.add_col(i + 1, j + 1, PadicDigits.one(spec, W))
            w.add_row(j + 1, i + 1, neg(PadicDigits.pi_power(spec, c[j] - c[i], W)))
        elif kind == "M2":
            # b_j - b_i > c_j - c_i: col_j += pi^(b_j-b_i-1) col_i, row_i -= pi^(c_i-c_j+b_j-b_i-1) row_j
            w.add_col(j + 1, i + 1, PadicDigits.pi_power(spec, b[j] - b[i] - 1, W))
            w.add_row(i + 1, j + 1, neg(PadicDigits.pi_power(spec, c[i] - c[j] + b[j] - b[i] - 1, W)))
        else:
            # c_1 < b_1: row_0 += row_1
            w.add_row(0, 1, PadicDigits.one(spec, W))
        b = _normalize_b(w, n, c, spec, W)
    delta = flat_delta(a, b, c)
    k1 = MatF(w.L)
    k2 = MatF([row[1:] for row in w.R[1:]])
    return delta, k1, k2


def _find_move(b, c, n):
    for i in range(n):
        for j in range(i + 1, n):
            if b[i] > b[j]:
                return ("M1", i, j)
    for i in range(n):
        for j in range(i + 1, n):
            if b[j] - b[i] > c[j] - c[i]:
                return ("M2", i, j)
    if c[0] < b[0]:
        return ("M3", 0, 0)
    return None


def _normalize_b(w, n, c, spec, W):
    """Make row 0 entries exact powers of pi (zeros become pi^c_j)."""
    b = []
    for j in range(n):
        x = w.a[0][j + 1]
        if not x.digits or x.shift >= W - 2:
            w.add_row(0, j + 1, PadicDigits.one(spec, W))
            x = w.a[0][j + 1]
        u = x.unit_part()
        # column j+1 scaled by u^-1 on the right, row j+1 by u on the left
        w.scale_col(j + 1, inv(u))
        w.scale_row(j + 1, u)
        w.a[0][j + 1] = PadicDigits.pi_power(spec, x.shift, W)
        w.a[j + 1][j + 1] = PadicDigits.pi_power(spec, c[j], W)
        b.append(x.shift)
    return b


class _Work2:
    """Matrix under left GL_{n+1}(O) and right iota(GL_n(O)) operations, tracking both."""

    def __init__(self, X: MatF):
        self.spec = X.spec
        self.W = X.prec
        self.a = [list(r) for r in X.rows]
        N = X.n
        self.L = [[PadicDigits.from_int(X.spec, int(i == j), self.W) for j in range(N)] for i in range(N)]
        self.R = [[PadicDigits.from_int(X.spec, int(i == j), self.W) for j in range(N)] for i in range(N)]

    def swap_rows(self, i, j):
        self.a[i], self.a[j] = self.a[j], self.a[i]
        self.L[i], self.L[j] = self.L[j], self.L[i]

    def add_row(self, dst, src, f):
        self.a[dst] = [add(x, mul(f, y)) for x, y in zip(self.a[dst], self.a[src])]
        self.L[dst] = [add(x, mul(f, y)) for x, y in zip(self.L[dst], self.L[src])]

    def scale_row(self, i, u):
        self.a[i] = [mul(u, x) for x in self.a[i]]
        self.L[i] = [mul(u, x) for x in self.L[i]]

    def add_col(self, dst, src, f):
        assert dst >= 1 and src >= 1
        for M in (self.a, self.R):
            for r in M:
                r[dst] = add(r[dst], mul(f, r[src]))

    def scale_col(self, j, u):
        for M in (self.a, self.R):
            for r in M:
                r[j] = mul(u, r[j])

    def left(self, M: MatF):
        self.a = matmul(M, MatF(self.a)).tolist()
        self.L = matmul(M, MatF(self.L)).tolist()

    def right(self, M: MatF):
        self.a = matmul(MatF(self.a), M).tolist()
        self.R = matmul(MatF(self.R), M).tolist()


# stabilizers ---------------------------------------------------------------------------

@lru_cache(maxsize=512)
def stabilizer(pair: PairDescriptor, delta: tuple, level: int, spec: RingSpec, budget=DEFAULT_BUDGET):
    """Image in K_0/K_level of the stabilizer of rep_delta, from the membership equations.

    Returns one (N, d, d) code array per group factor (row i across the arrays is
    one element), sorted by the joint lexicographic key.
    """
    delta = tuple(delta)
    if level == 0:
        return tuple(np.zeros((1, d, d), dtype=np.int64) for d in pair.group_dims)
    if pair.kind == "sym":
        return _stab_symmetric(pair, delta, level, spec, budget)
    return _stab_diagonal(pair, delta, level, spec, budget)


def _stab_symmetric(pair, mu, level, spec, budget):
    n, k = pair.n, pair.k
    N = n + k
    R = finite_ring(spec, level)
    m = [-x for x in mu]
    # free entries: B, E, D' (D = pi^m_j D', F = -D'), C, and per (i,j) one of J/A
    slots = []  # (name, i, j)
    for i in range(k):
        for j in range(n - k):
            slots.append(("B", i, j))
    for i in range(n - k):
        for j in range(n - k):
            slots.append(("E", i, j))
    for i in range(n - k):
        for j in range(k):
            slots.append(("Dp", i, j))
    for i in range(k):
        for j in range(k):
            slots.append(("C", i, j))
            slots.append(("J" if m[i] <= m[j] else "A", i, j))
    count = R.q ** len(slots)
    _check_budget(count, budget, "stabilizer candidates")
    vals = np.array(list(itertools.product(range(R.q), repeat=len(slots))), dtype=np.int64).reshape(count, len(slots))
    g = np.zeros((count, N, N), dtype=np.int64)
    get = {s: vals[:, t] for t, s in enumerate(slots)}
    pw = R.pi_power
    mt, at, nt = R.mul_t, R.add_t, R.neg_t
    for i in range(k):
        for j in range(n - k):
            g[:, i, k + j] = get[("B", i, j)]
    for i in range(n - k):
        for j in range(n - k):
            g[:, k + i, k + j] = get[("E", i, j)]
    for i in range(n - k):
        for j in range(k):
            d = get[("Dp", i, j)]
            g[:, k + i, j] = mt[pw(m[j]), d]
            g[:, k + i, n + j] = nt[d]
    for i in range(k):
        for j in range(k):
            C = get[("C", i, j)]
            g[:, i, n + j] = C
            if m[i] <= m[j]:
                J = get[("J", i, j)]
                A = at[mt[pw(m[j] - m[i]), J], nt[mt[pw(m[j]), C]]]
            else:
                A = get[("A", i, j)]
                J = at[mt[pw(m[i] - m[j]), A], mt[pw(m[i]), C]]
            g[:, i, j] = A
            g[:, n + i, n + j] = J
    good = R.is_unit(R.det(g))
    g = g[good]
    keys, idx = np.unique(R.keys(g), return_index=True)
    return (g[idx],)


def _stab_diagonal(pair, delta, level, spec, budget):
    n = pair.n
    a, b, c = split_delta(delta, n)
    N = level + max(c) - min(min(b), min(c))
    N = max(N, level)
    W = N + level + 8
    cands = gl_elements(n, spec, N, budget)
    R = finite_ring(spec, level)
    out1, out2 = [], []
    for code in cands:
        k2 = MatF.from_codes(spec, code, N, W)
        D = [[k2.rows[i][j].shifted(c[i] - c[j]) for j in range(n)] for i in range(n)]
        if not all(x.is_integral() for r in D for x in r):
            continue
        B = []
        ok = True
        for j in range(n):
            s = PadicDigits.pi_power(spec, b[j] - c[j], W).__neg__()
            for i in range(n):
                s = add(s, k2.rows[i][j].shifted(b[i] - c[j]))
            if not s.is_integral():
                ok = False
                break
            B.append(s)
        if not ok:
            continue
        one = PadicDigits.one(spec, W)
        zero = PadicDigits.zero(spec, W)
        k1 = MatF([[one] + B] + [[zero] + D[i] for i in range(n)])
        out1.append(reduce_mod(k1.with_prec(level), level))
        out2.append(reduce_mod(k2.with_prec(level), level))
    A1 = np.array(out1, dtype=np.int64)
    A2 = np.array(out2, dtype=np.int64)
    keys = joint_keys(R, (A1, A2))
    _, idx = np.unique(keys, return_index=True)
    return (A1[idx], A2[idx])


def joint_keys(R, arrays):
    """Lexicographic key across a tuple of code-matrix arrays (first factor most significant)."""
    key = np.zeros(len(arrays[0]), dtype=np.int64)
    for A in arrays:
        d = A.shape[1] * A.shape[2]
        if R.q ** d * (int(key.max()) + 1 if len(key) else 1) >= 2**62:
            raise OverflowError("joint key does not fit in 64 bits")
        key = key * R.q**d + R.keys(A)
    return key


# canonical points ---------------------------------------------------------------------------

def _digit_string(codes, level: int, p: int) -> str:
    mats = []
    for A in codes:
        rows = []
        for r in np.asarray(A):
            ents = []
            for c in r:
                digs = []
                c = int(c)
                for _ in range(level):
                    digs.append(c % p)
                    c //= p
                ents.append("".join(str(d) for d in reversed(digs)) if p <= 10 else ".".join(str(d) for d in reversed(digs)))
            rows.append(",".join(ents))
        mats.append(";".join(rows))
    return "|".join(mats)


def _parse_digit_string(text: str, dims, level: int, p: int):
    out = []
    for part, d in zip(text.split("|"), dims):
        rows = []
        for r in part.split(";"):
            ents = []
            for e in r.split(","):
                digs = e.split(".") if "." in e else list(e)
                c = 0
                for x in digs:
                    c = c * p + int(x)
                ents.append(c)
            rows.append(ents)
        A = np.array(rows, dtype=np.int64)
        if A.shape != (d, d):
            raise ParseError(f"coset key block has shape {A.shape}, expected {(d, d)}")
        out.append(A)
    return tuple(out)


@dataclass(frozen=True, order=True)
class CanonicalPoint:
    """A K_level-orbit on G/H: the cell delta plus the minimal element of kappa*Stab.

    ``coset_key`` holds one row-major code tuple per group factor (codes of O/pi^level).
    """

    pair: str
    delta: tuple
    level: int
    coset_key: tuple = field(default=())

    @property
    def descriptor(self) -> PairDescriptor:
        return PairDescriptor.parse(self.pair)

    def kappa(self, spec: RingSpec, prec: int = WORK_PREC):
        pd = self.descriptor
        if self.level == 0:
            return tuple(MatF.identity(spec, d, prec) for d in pd.group_dims)
        return tuple(
            MatF.from_codes(spec, np.array(c).reshape(d, d), self.level, prec)
            for c, d in zip(self.coset_key, pd.group_dims)
        )

    def representative(self, spec: RingSpec, prec: int = WORK_PREC) -> MatF:
        pd = self.descriptor
        return pd.act(self.kappa(spec, prec), pd.rep(self.delta, spec, prec))

    def modulus(self) -> int:
        return self.descriptor.modulus(self.delta, self.level)

    def to_json(self, p: int):
        dims = self.descriptor.group_dims
        codes = [np.array(c).reshape(d, d) for c, d in zip(self.coset_key, dims)] if self.level else []
        return {
            "pair": self.pair,
            "delta": list(self.delta),
            "level": self.level,
            "coset_key": _digit_string(codes, self.level, p) if self.level else "",
        }

    @classmethod
    def from_json(cls, d, p: int):
        pd = PairDescriptor.parse(d["pair"])
        level = int(d["level"])
        if level == 0:
            return cls(str(pd), tuple(d["delta"]), 0, ())
        codes = _parse_digit_string(d["coset_key"], pd.group_dims, level, p)
        return cls(str(pd), tuple(d["delta"]), level, tuple(tuple(int(x) for x in A.ravel()) for A in codes))

    def __str__(self):
        return f"{self.pair}{list(self.delta)}@{self.level}/{self.coset_key}"


def canon(pair: PairDescriptor, X: MatF):
    """Cell delta and kappa in K_0 (tuple per factor) with X's point = kappa . rep_delta."""
    if pair.kind == "sym":
        mu, k_w, _ = canon_symmetric(X, pair)
        return tuple(mu), (matinv(k_w),)
    delta, k1, k2 = canon_diagonal(X, pair)
    return delta, (matinv(k1), k2)


def point_precision_needed(pair: PairDescriptor, delta, level: int) -> int:
    ex = delta_exponents(pair, delta)
    return level + (max(max(ex), 0) - min(min(ex), 0)) + 2


def canonical_point(pair: PairDescriptor, X: MatF, level: int, budget=DEFAULT_BUDGET) -> CanonicalPoint:
    prec_in = X.prec
    delta, kappa = canon(pair, X)
    need = point_precision_needed(pair, delta, level)
    if prec_in < need:
        raise PrecisionLoss(f"point at level {level} in cell {list(delta)} needs precision {need}", required=need)
    return point_from_kappa(pair, delta, kappa, level, X.spec, budget)


def point_from_kappa(pair, delta, kappa, level, spec, budget=DEFAULT_BUDGET) -> CanonicalPoint:
    if level == 0:
        return CanonicalPoint(str(pair), tuple(delta), 0, ())
    R = finite_ring(spec, level)
    stab = stabilizer(pair, tuple(delta), level, spec, budget)
    prods = tuple(R.matmul(reduce_mod(kk.with_prec(level), level), S) for kk, S in zip(kappa, stab))
    keys = joint_keys(R, prods)
    i = int(np.argmin(keys))
    return CanonicalPoint(str(pair), tuple(delta), level, tuple(tuple(int(x) for x in P[i].ravel()) for P in prods))


# valuation of points --------------------------------------------------------------------------

def projector(g: MatF, n: int) -> MatF:
    """g diag(I_n, 0) g^-1: the embedding of gH used for valuations."""
    N = g.n
    E = MatF.from_ints(g.spec, np.diag([1] * n + [0] * (N - n)), g.prec)
    return matmul(matmul(g, E), matinv(g))


def val_point(pair: PairDescriptor, delta, spec: RingSpec) -> int:
    X = pair.rep(delta, spec)
    M = projector(X, pair.n) if pair.kind == "sym" else X
    v = M.min_val()
    return 0 if v is None else v


# P_l and B factorizations ------------------------------------------------------------------------

def p_ell_factor(g: MatF, pair: PairDescriptor, level: int):
    """(p, h) with g x0 = p x0 h, p in the block-lower subgroup P_l, h in H."""
    if pair.kind != "sym":
        raise ValueError("p_ell_factor applies to the symmetric pair")
    if level < 2 or not in_congruence(g, level):
        raise NotInCongruenceSubgroup(f"matrix is not in K_{level} (level must exceed 1)")
    n, k = pair.n, pair.k
    spec = g.spec
    prec = g.prec
    N = n + k
    X = g - MatF.identity(spec, N, prec)
    m = n - k
    s = [0, k, n, N] if m else [0, k, N]
    blk = [[X.block(s[i], s[i + 1], s[j], s[j + 1]) for j in range(len(s) - 1)] for i in range(len(s) - 1)]
    if m:
        (A, B, C), (D, E, F), (G, Hh, I) = blk
    else:
        (A, C), (G, I) = blk
    Ik = MatF.identity(spec, k, prec)
    IA = Ik + A
    IAinv = matinv(IA)
    IACinv = matinv(IA + C)
    z = lambda r, c: MatF.zeros(spec, r, c, prec)
    if m:
        Im = MatF.identity(spec, m, prec)
        Fp = matmul(D + F, IACinv)
        Hp = matmul(Hh - matmul(matmul(G, IAinv), B), matinv(Im + E - matmul(matmul(D, IAinv), B)))
        Gp = matmul(G - matmul(Hp, D), IAinv)
        Ip = matmul(G + I - A - C, IACinv) - Gp
        p_elem = _blocks3([[Ik, z(k, m), z(k, k)], [z(m, k), Im, Fp], [Gp, Hp, Ik + Ip]])
        h_top = _blocks2(IA, B, D, Im + E)
    else:
        Gp = matmul(G, IAinv)
        Ip = matmul(G + I - A - C, IACinv) - Gp
        p_elem = _blocks2(Ik, z(k, k), Gp, Ik + Ip)
        h_top = IA
    h_elem = block_diag(h_top, Ik + A + C)
    return p_elem, h_elem


def _blocks3(rows) -> MatF:
    from .dvr_linalg import block_matrix

    return block_matrix(rows)


def b_factor(y: MatF, pair: PairDescriptor, level: int):
    """(b1, b2): b1 lower triangular in K_l(GL_{n+1}), b2 upper triangular in
    K_l(GL_n), with b1 x0 iota(b2)^-1 = y."""
    if pair.kind != "diag":
        raise ValueError("b_factor applies to the diagonal pair")
    n = pair.n
    spec = y.spec
    prec = y.prec
    x0 = pair.x0(spec, prec)
    if level < 1 or not y.is_integral() or (y - x0).min_val() is not None and (y - x0).min_val() < level:
        raise NotInNeighborhood(f"point is not within pi^{level} of x0")
    a = y[0, 0]
    ainv = inv(a)
    c = [y[i, 0] for i in range(1, n + 1)]
    one = PadicDigits.one(spec, prec)
    zero = PadicDigits.zero(spec, prec)
    L1 = MatF(
        [[ainv] + [zero] * n]
        + [[neg(mul(c[i], ainv))] + [one if j == i else zero for j in range(n)] for i in range(n)]
    )
    y1 = matmul(L1, y)
    Dp = MatF([r[1:] for r in y1.rows[1:]])
    L, U = lu_congruence(Dp, level)
    y2 = matmul(iota(matinv(L)), y1)
    Ui = matinv(U)
    y3 = matmul(y2, iota(Ui))
    bpp = [y3[0, j + 1] for j in range(n)]
    delta = [inv(x) for x in bpp]
    Dd = MatF([[delta[i] if i == j else zero for j in range(n)] for i in range(n)])
    Ddi = MatF([[bpp[i] if i == j else zero for j in range(n)] for i in range(n)])
    T_L = matmul(matmul(iota(Ddi), iota(matinv(L))), L1)
    b1 = matinv(T_L)
    b2 = matmul(Ui, Dd)
    return b1, b2


# smoothness-shape validator ------------------------------------------------------------------------

@dataclass
class Equation:
    """sum sign * a[var] * pi^power  =  rhs  (rhs None for 0, else (sign, power))."""

    terms: list
    rhs: tuple | None = None

    def __str__(self):
        lhs = " + ".join(f"{'-' if s < 0 else ''}a{v}*pi^{e}" for s, v, e in self.terms) or "0"
        r = "0" if self.rhs is None else f"{'-' if self.rhs[0] < 0 else ''}pi^{self.rhs[1]}"
        return f"{lhs} = {r}"


@dataclass
class SmoothnessReport:
    passed: bool
    equations: list
    offending: list

    def to_json(self):
        return {
            "passed": self.passed,
            "equations": len(self.equations),
            "offending": [str(e) for e in self.offending],
        }


def check_equations(eqs) -> SmoothnessReport:
    bad = []
    for e in eqs:
        vars_ = [v for _, v, _ in e.terms]
        if len(set(vars_)) != len(vars_):
            bad.append(e)
            continue
        if e.rhs is not None and e.rhs[0] != 1:
            bad.append(e)
    return SmoothnessReport(not bad, list(eqs), bad)


def _mono_rep(pair: PairDescriptor, delta):
    """Canonical representative as a monomial matrix: entries None or (sign, power)."""
    if pair.kind == "sym":
        n, k = pair.n, pair.k
        N = n + k
        M = [[(1, 0) if i == j else None for j in range(N)] for i in range(N)]
        for i in range(k):
            M[i][n + i] = (1, delta[i])
        Minv = [row[:] for row in M]
        for i in range(k):
            Minv[i][n + i] = (-1, delta[i])
        return M, Minv
    a, b, c = split_delta(delta, pair.n)
    n = pair.n
    M = [[None] * (n + 1) for _ in range(n + 1)]
    M[0][0] = (1, a)
    for j in range(n):
        M[0][j + 1] = (1, b[j])
        M[j + 1][j + 1] = (1, c[j])
    return M, None


def smoothness_equations(pair: PairDescriptor, delta_x, delta_y):
    """Equations cutting out {g : g x = y} for canonical cone points x, y."""
    eqs = []
    if pair.kind == "sym":
        n, k = pair.n, pair.k
        N = n + k
        rx, _ = _mono_rep(pair, delta_x)
        _, ryi = _mono_rep(pair, delta_y)
        var = lambda c, d: c * N + d
        for a_ in range(N):
            for b_ in range(N):
                if (a_ < n) == (b_ < n):
                    continue  # H-block entries are unconstrained
                terms = []
                for c_ in range(N):
                    if ryi[a_][c_] is None:
                        continue
                    for d_ in range(N):
                        if rx[d_][b_] is None:
                            continue
                        s = ryi[a_][c_][0] * rx[d_][b_][0]
                        terms.append((s, var(c_, d_), ryi[a_][c_][1] + rx[d_][b_][1]))
                eqs.append(Equation(terms, None))
        return eqs
    n = pair.n
    N = n + 1
    X, _ = _mono_rep(pair, delta_x)
    Y, _ = _mono_rep(pair, delta_y)
    v1 = lambda i, j: i * N + j
    v2 = lambda i, j: N * N + i * n + j
    for i in range(N):
        for j in range(N):
            terms = []
            rhs = None
            for cc in range(N):
                if X[cc][j] is not None:
                    s, e = X[cc][j]
                    terms.append((s, v1(i, cc), e))
            # - (Y iota(k2))_{ij}
            if j == 0:
                if Y[i][0] is not None:
                    rhs = Y[i][0]
            else:
                for d in range(1, N):
                    if Y[i][d] is not None:
                        s, e = Y[i][d]
                        terms.append((-s, v2(d - 1, j - 1), e))
            eqs.append(Equation(terms, rhs))
    return eqs


def validate_smoothness_shape(pair: PairDescriptor, delta_x, delta_y) -> SmoothnessReport:
    return check_equations(smoothness_equations(pair, tuple(delta_x), tuple(delta_y)))


def points_of_cell(pair: PairDescriptor, delta, level: int, spec: RingSpec, budget=DEFAULT_BUDGET):
    """Every CanonicalPoint K_l kappa x_delta with kappa in K_0, sorted."""
    delta = tuple(delta)
    if level == 0:
        return [CanonicalPoint(str(pair), delta, 0, ())]
    R = finite_ring(spec, level)
    stab = stabilizer(pair, delta, level, spec, budget)
    factors = [gl_elements(d, spec, level, budget) for d in pair.group_dims]
    seen = set()
    out = []
    for combo in itertools.product(*factors):
        prods = tuple(R.matmul(k, S) for k, S in zip(combo, stab))
        keys = joint_keys(R, prods)
        if int(keys.min()) in seen:
            continue
        seen.add(int(keys.min()))
        i = int(np.argmin(keys))
        out.append(CanonicalPoint(str(pair), delta, level, tuple(tuple(int(x) for x in P[i].ravel()) for P in prods)))
    return sorted(out)
