"""Finite quotients of GL_n(O), orbit closures, coset decompositions, double-coset keys.

Group elements of GL_n(O/pi^m) are code matrices over :class:`FiniteRing`
(see ``finite_ring``); orbit closures are breadth-first and vectorized through
the batched kernels, and every returned orbit is sorted by its integer key,
which is the row-major digit-lexicographic order.
"""
from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .dvr_linalg import MatF, cartan, matmul, reduce_mod
from .errors import BudgetExceeded, PrecisionLoss
from .finite_ring import FiniteRing, finite_ring
from .local_ring import PadicDigits, RingSpec

DEFAULT_BUDGET = 10**7


def gl_order(n: int, q: int) -> int:
    out = 1
    for i in range(n):
        out *= q**n - q**i
    return out


def quotient_size(n: int, p: int, m: int) -> int:
    """|GL_n(O/pi^m)| = p^((m-1) n^2) |GL_n(F_p)|."""
    return p ** ((m - 1) * n * n) * gl_order(n, p)


def _check_budget(count, budget, what):
    if budget is not None and count > budget:
        raise BudgetExceeded(f"{what}: {count} elements exceed the budget {budget}")


@dataclass(frozen=True)
class FiniteQuotient:
    shape: tuple
    spec: RingSpec
    m: int
    elements: tuple  # one (N_i, n_i, n_i) code array per GL factor

    @property
    def size(self) -> int:
        return math.prod(len(e) for e in self.elements)

    @property
    def ring(self) -> FiniteRing:
        return finite_ring(self.spec, self.m)


@lru_cache(maxsize=32)
def _gl_residue(n: int, p: int) -> np.ndarray:
    """GL_n(F_p) as digit matrices, sorted."""
    R = finite_ring(RingSpec(p, 1), 1)
    allm = np.array(list(itertools.product(range(p), repeat=n * n)), dtype=np.int64).reshape(-1, n, n)
    d = R.det(allm)
    return allm[d != 0]


def gl_elements(n: int, spec: RingSpec, m: int, budget=DEFAULT_BUDGET) -> np.ndarray:
    """All of GL_n(O/pi^m), as code matrices sorted by key."""
    _check_budget(quotient_size(n, spec.p, m), budget, f"GL_{n}(O/pi^{m})")
    base = _gl_residue(n, spec.p) * spec.p ** (m - 1)
    t = spec.p ** (m - 1)
    lifts = np.array(list(itertools.product(range(t), repeat=n * n)), dtype=np.int64).reshape(-1, n, n)
    out = (base[:, None] + lifts[None]).reshape(-1, n, n)
    R = finite_ring(spec, m)
    return out[np.argsort(R.keys(out), kind="stable")]


def enumerate_quotient(shape, spec: RingSpec, m: int, budget=DEFAULT_BUDGET) -> FiniteQuotient:
    """GL_n(O/pi^m), or a product of such for a tuple ``shape``."""
    shape = (shape,) if isinstance(shape, int) else tuple(shape)
    total = math.prod(quotient_size(n, spec.p, m) for n in shape)
    _check_budget(total, budget, f"quotient {shape} mod pi^{m}")
    return FiniteQuotient(shape, spec, m, tuple(gl_elements(n, spec, m, budget) for n in shape))


def congruence_elements(n: int, spec: RingSpec, level: int, m: int, budget=DEFAULT_BUDGET) -> np.ndarray:
    """K_level / K_m as code matrices (level >= 1), sorted."""
    if level == 0:
        return gl_elements(n, spec, m, budget)
    k = m - level
    _check_budget(spec.p ** (k * n * n), budget, f"K_{level}/K_{m}")
    R = finite_ring(spec, m)
    lifts = np.array(list(itertools.product(range(spec.p**k), repeat=n * n)), dtype=np.int64).reshape(-1, n, n)
    out = lifts + np.eye(n, dtype=np.int64) * R.one
    return out[np.argsort(R.keys(out), kind="stable")]


def congruence_generators(n: int, spec: RingSpec, level: int, m: int) -> np.ndarray:
    """A generating set of K_level/K_m (K_0/K_m when level is 0)."""
    R = finite_ring(spec, m)
    I = R.identity(n)
    gens = []
    lo = max(level, 1)
    for s in range(lo, m):
        for i in range(n):
            for j in range(n):
                g = I.copy()
                g[i, j] = R.add_t[g[i, j], R.pi_power(s)]
                gens.append(g)
    if level == 0:
        for i in range(n):
            for j in range(n):
                if i != j:
                    g = I.copy()
                    g[i, j] = R.one
                    gens.append(g)
        if spec.p > 2:
            r = _primitive_root(spec.p)
            g = I.copy()
            g[0, 0] = r * spec.p ** (m - 1)
            gens.append(g)
    if not gens:
        gens.append(I)
    return np.array(gens, dtype=np.int64)


def _primitive_root(p: int) -> int:
    for g in range(2, p):
        if all(pow(g, (p - 1) // f, p) != 1 for f in _prime_factors(p - 1)):
            return g
    return 1


def _prime_factors(n):
    out, d = [], 2
    while d * d <= n:
        while n % d == 0:
            out.append(d)
            n //= d
        d += 1
    if n > 1:
        out.append(n)
    return set(out)


# orbit closure ------------------------------------------------------------------

def orbit_closure(seed, generators, action, budget=DEFAULT_BUDGET, key=None):
    """Breadth-first closure of ``seed`` under ``action(g, x)`` for g in generators.

    Works on arbitrary hashable points; returns a tuple sorted by ``key``.
    """
    seen = {seed}
    queue = deque([seed])
    while queue:
        x = queue.popleft()
        for g in generators:
            y = action(g, x)
            if y not in seen:
                seen.add(y)
                _check_budget(len(seen), budget, "orbit")
                queue.append(y)
    return tuple(sorted(seen, key=key))


def orbit_closure_batch(seeds: np.ndarray, moves, keyfn, budget=DEFAULT_BUDGET) -> np.ndarray:
    """Vectorized closure: ``moves`` map an (N, ...) array to an (N, ...) array.

    Returns the unique elements of the closure sorted by ``keyfn`` (an int64 key
    per element that must be injective).
    """
    seeds = np.asarray(seeds, dtype=np.int64)
    k0, idx = np.unique(keyfn(seeds), return_index=True)
    frontier = seeds[idx]
    visited_keys = k0
    chunks = [frontier]
    while len(frontier):
        cand = np.concatenate([mv(frontier) for mv in moves])
        ck, ci = np.unique(keyfn(cand), return_index=True)
        fresh = ~np.isin(ck, visited_keys, assume_unique=True)
        frontier = cand[ci[fresh]]
        if not len(frontier):
            break
        visited_keys = np.union1d(visited_keys, ck[fresh])
        _check_budget(len(visited_keys), budget, "orbit")
        chunks.append(frontier)
    allx = np.concatenate(chunks)
    return allx[np.argsort(keyfn(allx), kind="stable")]


def bi_orbit(ring: FiniteRing, x: np.ndarray, left_gens, right_gens, budget=DEFAULT_BUDGET) -> np.ndarray:
    """Closure of one code matrix under left and right generator multiplication."""
    moves = [(lambda X, g=g: ring.matmul(g, X)) for g in left_gens]
    moves += [(lambda X, g=g: ring.matmul(X, g)) for g in right_gens]
    return orbit_closure_batch(np.asarray(x)[None], moves, ring.keys, budget)


def orbit_partition(ring: FiniteRing, points: np.ndarray, moves, budget=DEFAULT_BUDGET) -> np.ndarray:
    """Orbit label (the minimal key in the orbit) of every point, via union-find on keys.

    ``points`` must be closed under the moves.
    """
    keys = ring.keys(points)
    order = np.argsort(keys)
    skeys = keys[order]
    parent = np.arange(len(points))

    def find(a):
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    _check_budget(len(points) * max(len(moves), 1), budget, "orbit partition")
    for mv in moves:
        img = ring.keys(mv(points))
        pos = np.searchsorted(skeys, img)
        if np.any(pos >= len(skeys)) or np.any(skeys[np.minimum(pos, len(skeys) - 1)] != img):
            raise ValueError("point set is not closed under the moves")
        tgt = order[pos]
        for a, b in zip(range(len(points)), tgt):
            ra, rb = find(a), find(int(b))
            if ra != rb:
                if keys[ra] < keys[rb]:
                    parent[rb] = ra
                else:
                    parent[ra] = rb
    roots = np.array([find(a) for a in range(len(points))])
    return keys[roots]


# coset decompositions ------------------------------------------------------------

def _sorted_perm(lam):
    """Permutation w (as index list) with lam[w] non-decreasing."""
    return sorted(range(len(lam)), key=lambda i: (lam[i], i))


def _in_stab(U: MatF, lam, level) -> bool:
    # U in K_level ∩ pi^lam K_level pi^-lam
    n = U.n
    for i in range(n):
        for j in range(n):
            x = U.rows[i][j]
            if i == j:
                x = x - 1
            need = level + max(0, lam[i] - lam[j])
            if x.digits and x.shift < need:
                return False
    return True


def coset_index(lam, level: int, p: int) -> int:
    n = len(lam)
    if level >= 1:
        return p ** sum(lam[i] - lam[j] for i in range(n) for j in range(n) if lam[i] > lam[j])
    return None


def left_coset_reps(lam, level: int, spec: RingSpec, n: int | None = None, prec: int = 24, budget=DEFAULT_BUDGET):
    """Elements g_i with K_l pi^lam K_l = disjoint union of g_i K_l.

    For level >= 1 these are u_i pi^lam with u_i lower unipotent in K_l (after
    sorting lam); for level 0 they are the column-Hermite forms in the cell.
    """
    lam = tuple(int(x) for x in lam)
    n = len(lam) if n is None else n
    if level >= 1:
        return [matmul(u, MatF.diag_pi(spec, lam, prec)) for u in _unipotent_reps(lam, level, spec, prec, budget)]
    return _hermite_reps(lam, spec, prec, budget)


def right_coset_reps(lam, level: int, spec: RingSpec, prec: int = 24, budget=DEFAULT_BUDGET):
    """Elements h_i with K_l pi^lam K_l = disjoint union of K_l h_i (transposes)."""
    return [g.transpose() for g in left_coset_reps(lam, level, spec, prec=prec, budget=budget)]


def _unipotent_reps(lam, level, spec, prec, budget):
    n = len(lam)
    w = _sorted_perm(lam)
    sl = [lam[i] for i in w]
    slots = [(i, j) for i in range(n) for j in range(i) if sl[i] > sl[j]]
    ranges = [spec.p ** (sl[i] - sl[j]) for i, j in slots]
    _check_budget(math.prod(ranges), budget, "left coset representatives")
    reps = []
    for combo in itertools.product(*[range(r) for r in ranges]):
        rows = [[PadicDigits.from_int(spec, int(a == b), prec) for b in range(n)] for a in range(n)]
        for (i, j), c, (a, b) in zip(slots, combo, [(w[i], w[j]) for i, j in slots]):
            width = sl[i] - sl[j]
            rows[a][b] = PadicDigits.from_code(spec, c, width, level, prec) if c else PadicDigits.zero(spec, prec)
        reps.append(MatF(rows))
    return reps


def _hermite_reps(lam, spec, prec, budget):
    n = len(lam)
    shift = min(lam)
    nl = [x - shift for x in lam]
    total = sum(nl)
    top = max(nl)
    out = []
    count = 0
    for a in itertools.product(range(top + 1), repeat=n):
        if sum(a) != total:
            continue
        slots = [(i, j) for i in range(n) for j in range(i + 1, n)]
        ranges = [spec.p ** a[i] for i, j in slots]
        count += math.prod(ranges)
        _check_budget(count, budget, "Hermite representatives")
        for combo in itertools.product(*[range(r) for r in ranges]):
            rows = [[PadicDigits.zero(spec, prec) for _ in range(n)] for _ in range(n)]
            for i in range(n):
                rows[i][i] = PadicDigits.pi_power(spec, a[i], prec)
            for (i, j), c in zip(slots, combo):
                if c:
                    rows[i][j] = PadicDigits.from_code(spec, c, a[i], 0, prec)
            H = MatF(rows)
            if tuple(cartan(H).lam) == tuple(sorted(nl)):
                out.append(H.shifted(shift) if shift else H)
    return out


# double-coset keys ------------------------------------------------------------------

def window_floor(lam) -> int:
    return -min(min(lam), 0)


def key_modulus(lam, level: int) -> int:
    return level + max(max(lam), 0) - min(min(lam), 0)


@dataclass(frozen=True, order=True)
class DoubleCosetKey:
    """Canonical label of K_l g K_l: the Cartan cell and a class of (k1, k2) mod pi^l.

    ``k1``/``k2`` are code tuples (row-major) of the lexicographically minimal
    pair in the orbit of (k1 mod pi^l, k2 mod pi^l) under the stabilizer of
    pi^lambda in K_0 x K_0.
    """

    lam: tuple
    level: int
    k1: tuple = ()
    k2: tuple = ()

    @property
    def window_floor(self) -> int:
        return window_floor(self.lam)

    @property
    def modulus(self) -> int:
        return key_modulus(self.lam, self.level)

    @property
    def n(self) -> int:
        return len(self.lam)

    def representative(self, spec: RingSpec, prec: int = 24) -> MatF:
        """A group element in the double coset: k1 pi^lambda k2 with digit lifts."""
        D = MatF.diag_pi(spec, self.lam, prec)
        if self.level == 0:
            return D
        n = self.n
        A = MatF.from_codes(spec, np.array(self.k1).reshape(n, n), self.level, prec)
        B = MatF.from_codes(spec, np.array(self.k2).reshape(n, n), self.level, prec)
        return matmul(matmul(A, D), B)

    def to_json(self):
        return {"lambda": list(self.lam), "level": self.level, "k1": list(self.k1), "k2": list(self.k2)}

    @classmethod
    def from_json(cls, d):
        return cls(tuple(d["lambda"]), int(d["level"]), tuple(d.get("k1", ())), tuple(d.get("k2", ())))

    def __str__(self):
        lam = ",".join(str(x) for x in self.lam)
        if self.level == 0:
            return f"[{lam}]"
        return f"[{lam}]/{'.'.join(map(str, self.k1))}|{'.'.join(map(str, self.k2))}"


def _pair_key(ring: FiniteRing, A, B):
    n2 = A.shape[1] * A.shape[2]
    return ring.keys(A) * ring.q**n2 + ring.keys(B)


@lru_cache(maxsize=256)
def cell_stabilizer(lam: tuple, level: int, spec: RingSpec, budget=DEFAULT_BUDGET):
    """Image of {c in K_0 : pi^-lam c pi^lam in K_0} in (K_0/K_l)^2 under
    c -> (c, pi^-lam c^-1 pi^lam), as two stacked code arrays."""
    n = len(lam)
    R = finite_ring(spec, level)
    I = R.identity(n)
    gens1, gens2 = [], []

    def push(c_rows):
        # c given by digit lifts; compute both images exactly then reduce
        C = MatF(c_rows)
        from .dvr_linalg import matinv

        Ci = matinv(C)
        conj = MatF(
            [[Ci.rows[i][j].shifted(lam[j] - lam[i]) for j in range(n)] for i in range(n)]
        )
        gens1.append(reduce_mod(C, level))
        gens2.append(reduce_mod(conj.with_prec(level), level))

    W = level + (max(lam) - min(lam)) + 4
    one = PadicDigits.one(spec, W)
    zero = PadicDigits.zero(spec, W)

    def base():
        return [[one if i == j else zero for j in range(n)] for i in range(n)]

    for i in range(n):
        for j in range(n):
            lo = max(0, lam[i] - lam[j])
            hi = max(level, level + lam[i] - lam[j])
            for s in range(lo, hi):
                if i == j and s == 0:
                    continue
                rows = base()
                rows[i][j] = PadicDigits.from_int(spec, int(i == j), W) + PadicDigits.pi_power(spec, s, W)
                push(rows)
    if spec.p > 2:
        for i in range(n):
            rows = base()
            rows[i][i] = PadicDigits.from_int(spec, _primitive_root(spec.p), W)
            push(rows)
    if not gens1:
        return I[None], I[None]
    G1 = np.array(gens1)
    G2 = np.array(gens2)
    N = I[None]

    def keyfn(P):
        return _pair_key(R, P[:, 0], P[:, 1])

    # c -> (c, conj(c^-1)) reverses products in the second slot
    moves = [
        (lambda P, a=a, b=b: np.stack([R.matmul(P[:, 0], a), R.matmul(b, P[:, 1])], axis=1))
        for a, b in zip(G1, G2)
    ]
    seed = np.stack([N, N], axis=1)
    closure = orbit_closure_batch(seed, moves, keyfn, budget)
    return closure[:, 0], closure[:, 1]


def key_from_cartan(lam, k1: MatF, k2: MatF, level: int, spec: RingSpec, budget=DEFAULT_BUDGET) -> DoubleCosetKey:
    lam = tuple(int(x) for x in lam)
    if level == 0:
        return DoubleCosetKey(lam, 0)
    R = finite_ring(spec, level)
    a = reduce_mod(k1, level)
    b = reduce_mod(k2, level)
    C1, C2 = cell_stabilizer(lam, level, spec, budget)
    # orbit of (a, b) is {(a c, c' b)}
    A = R.matmul(a, C1)
    B = R.matmul(C2, b)
    keys = _pair_key(R, A, B)
    i = int(np.argmin(keys))
    return DoubleCosetKey(lam, level, tuple(int(x) for x in A[i].ravel()), tuple(int(x) for x in B[i].ravel()))


def double_coset_key(g: MatF, level: int, lam=None, budget=DEFAULT_BUDGET) -> DoubleCosetKey:
    """Canonical key of K_l g K_l.  ``lam`` (if given) is checked against Cartan."""
    cf = cartan(g, level)
    if lam is not None and tuple(lam) != tuple(cf.lam):
        raise ValueError(f"matrix lies in the cell {cf.lam}, not {tuple(lam)}")
    need = level + max(cf.lam)
    if g.prec < need:
        raise PrecisionLoss(f"double coset at level {level} needs precision {need}", required=need)
    return key_from_cartan(cf.lam, cf.k1, cf.k2, level, g.spec, budget)


def right_reps_of_key(key: DoubleCosetKey, spec: RingSpec, prec: int = 24, budget=DEFAULT_BUDGET):
    """h_i with K_l g K_l = disjoint union K_l h_i, for g the key's representative."""
    D_reps = right_coset_reps(key.lam, key.level, spec, prec, budget)
    if key.level == 0:
        return D_reps
    n = key.n
    A = MatF.from_codes(spec, np.array(key.k1).reshape(n, n), key.level, prec)
    B = MatF.from_codes(spec, np.array(key.k2).reshape(n, n), key.level, prec)
    return [matmul(matmul(A, h), B) for h in D_reps]


# oracle helpers -----------------------------------------------------------------------

def integral_window(g: MatF, lam):
    """(g scaled to be integral, modulus M) for the bi-orbit oracle."""
    w = window_floor(lam)
    return g.shifted(w), w


def bi_orbit_of(g: MatF, level: int, budget=DEFAULT_BUDGET):
    """Independent oracle: the K_l/K_M bi-orbit of g (scaled integral) mod pi^M, sorted keys."""
    cf = cartan(g, level)
    lam = cf.lam
    M = key_modulus(lam, level)
    g0, _ = integral_window(g, lam)
    R = finite_ring(g.spec, M)
    x = reduce_mod(g0, M)
    gens = congruence_generators(g.n, g.spec, level, M)
    orb = bi_orbit(R, x, gens, gens, budget)
    return R.keys(orb), M


def keys_of_cell(lam, level: int, spec: RingSpec, budget=DEFAULT_BUDGET):
    """Every DoubleCosetKey K_l g K_l inside K_0 pi^lam K_0, sorted."""
    lam = tuple(int(x) for x in lam)
    if level == 0:
        return [DoubleCosetKey(lam, 0)]
    n = len(lam)
    R = finite_ring(spec, level)
    G = gl_elements(n, spec, level, budget)
    _check_budget(len(G) ** 2, budget, "pairs of K_0/K_l elements")
    C1, C2 = cell_stabilizer(lam, level, spec, budget)
    gk = R.keys(G)
    seen = np.zeros((len(G), len(G)), dtype=bool)
    out = []
    for i in range(len(G)):
        A = R.matmul(G[i], C1)
        ai = np.searchsorted(gk, R.keys(A))
        for j in range(len(G)):
            if seen[i, j]:
                continue
            B = R.matmul(C2, G[j])
            bj = np.searchsorted(gk, R.keys(B))
            seen[ai, bj] = True
            keys = _pair_key(R, A, B)
            t = int(np.argmin(keys))
            out.append(DoubleCosetKey(lam, level, tuple(int(x) for x in A[t].ravel()), tuple(int(x) for x in B[t].ravel())))
    return sorted(out)
