"""Matrices over truncated local rings: products, inverses, Cartan/Smith form, LU.

Entries are :class:`PadicDigits`.  Decompositions run on the digits of the
input taken as an exact lift at a raised working precision; the precision that
is actually certified is then measured by reconstructing the input.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NotInCongruenceSubgroup, ParseError, PrecisionLoss, Singular, SpecMismatch
from .local_ring import (
    INF,
    PadicDigits,
    RingSpec,
    add,
    divide,
    inv,
    mul,
    neg,
    parse_literal,
    sub,
    truncate,
)


class MatF:
    """Immutable matrix of PadicDigits over one ring spec."""

    __slots__ = ("spec", "rows", "_hash")

    def __init__(self, rows: Sequence[Sequence[PadicDigits]]):
        rows = tuple(tuple(r) for r in rows)
        if not rows or not rows[0]:
            raise ValueError("empty matrix")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ValueError("ragged matrix")
        spec = rows[0][0].spec
        for r in rows:
            for x in r:
                if x.spec != spec:
                    raise SpecMismatch(f"{x.spec} vs {spec}")
        object.__setattr__(self, "spec", spec)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("MatF is immutable")

    # construction -----------------------------------------------------------
    @classmethod
    def from_ints(cls, spec: RingSpec, rows, prec: int) -> "MatF":
        return cls([[PadicDigits.from_int(spec, int(x), prec) for x in r] for r in rows])

    @classmethod
    def identity(cls, spec: RingSpec, n: int, prec: int) -> "MatF":
        return cls.from_ints(spec, np.eye(n, dtype=int), prec)

    @classmethod
    def zeros(cls, spec: RingSpec, r: int, c: int, prec: int) -> "MatF":
        return cls([[PadicDigits.zero(spec, prec)] * c for _ in range(r)])

    @classmethod
    def diag_pi(cls, spec: RingSpec, lam, prec: int) -> "MatF":
        n = len(lam)
        z = PadicDigits.zero(spec, prec)
        return cls([[PadicDigits.pi_power(spec, lam[i], prec) if i == j else z for j in range(n)] for i in range(n)])

    @classmethod
    def from_codes(cls, spec: RingSpec, codes, m: int, prec: int | None = None, lo: int = 0) -> "MatF":
        """Inverse of :func:`reduce_mod`: digit lifts of code matrices."""
        return cls([[PadicDigits.from_code(spec, int(c), m, lo, (lo + m) if prec is None else prec) for c in r] for r in np.asarray(codes)])

    # shape and access -------------------------------------------------------
    @property
    def shape(self):
        return len(self.rows), len(self.rows[0])

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def prec(self) -> int:
        return min(x.prec for r in self.rows for x in r)

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def tolist(self):
        return [list(r) for r in self.rows]

    def min_val(self):
        """Smallest entry valuation; None if every entry is zero at precision."""
        vals = [x.shift for r in self.rows for x in r if x.digits]
        return min(vals) if vals else None

    def is_integral(self) -> bool:
        return all(x.is_integral() for r in self.rows for x in r)

    def map(self, f) -> "MatF":
        return MatF([[f(x) for x in r] for r in self.rows])

    def with_prec(self, prec: int) -> "MatF":
        return self.map(lambda x: x.with_prec(prec))

    def truncated(self, m: int) -> "MatF":
        return self.map(lambda x: truncate(x, m))

    def shifted(self, k: int) -> "MatF":
        return self.map(lambda x: x.shifted(k))

    def transpose(self) -> "MatF":
        return MatF(list(zip(*self.rows)))

    def block(self, r0, r1, c0, c1) -> "MatF":
        return MatF([r[c0:c1] for r in self.rows[r0:r1]])

    # algebra ---------------------------------------------------------------
    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        _same(self, other)
        return MatF([[add(a, b) for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)])

    def __sub__(self, other):
        _same(self, other)
        return MatF([[sub(a, b) for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)])

    def __neg__(self):
        return self.map(neg)

    def scale(self, c: PadicDigits) -> "MatF":
        return self.map(lambda x: mul(c, x))

    # comparison ------------------------------------------------------------
    def __eq__(self, other):
        return isinstance(other, MatF) and self.rows == other.rows

    def __hash__(self):
        if self._hash is None:
            object.__setattr__(self, "_hash", hash(self.rows))
        return self._hash

    def agreement(self, other: "MatF") -> int:
        """Largest m such that the two matrices are known equal modulo pi^m."""
        _same(self, other)
        best = None
        for a, b in zip(self.flat(), other.flat()):
            d = sub(a, b)
            m = d.shift  # zero difference: its precision
            best = m if best is None else min(best, m)
        return best

    def equal_mod(self, other: "MatF", m: int) -> bool:
        if m > min(self.prec, other.prec):
            raise PrecisionLoss(f"cannot compare matrices modulo pi^{m}", required=m)
        return self.agreement(other) >= m

    def flat(self):
        return [x for r in self.rows for x in r]

    def __repr__(self):
        return "MatF(" + format_matrix(self) + ")"


def _same(a: MatF, b: MatF):
    if a.spec != b.spec:
        raise SpecMismatch(f"{a.spec} vs {b.spec}")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")


def matmul(A: MatF, B: MatF) -> MatF:
    if A.spec != B.spec:
        raise SpecMismatch(f"{A.spec} vs {B.spec}")
    if A.shape[1] != B.shape[0]:
        raise ValueError(f"cannot multiply {A.shape} by {B.shape}")
    cols = list(zip(*B.rows))
    out = []
    for r in A.rows:
        row = []
        for c in cols:
            acc = mul(r[0], c[0])
            for a, b in zip(r[1:], c[1:]):
                acc = add(acc, mul(a, b))
            row.append(acc)
        out.append(row)
    return MatF(out)


def block_matrix(blocks) -> MatF:
    """Assemble a matrix from a 2-D list of MatF blocks."""
    rows = []
    for brow in blocks:
        h = brow[0].shape[0]
        for i in range(h):
            rows.append([x for b in brow for x in b.rows[i]])
    return MatF(rows)


def block_diag(*mats: MatF) -> MatF:
    spec = mats[0].spec
    prec = min(m.prec for m in mats)
    n = sum(m.shape[0] for m in mats)
    c = sum(m.shape[1] for m in mats)
    z = PadicDigits.zero(spec, prec)
    rows = [[z] * c for _ in range(n)]
    r0 = c0 = 0
    for m in mats:
        for i in range(m.shape[0]):
            for j in range(m.shape[1]):
                rows[r0 + i][c0 + j] = m.rows[i][j]
        r0 += m.shape[0]
        c0 += m.shape[1]
    return MatF(rows)


# exact-lift elimination ------------------------------------------------------

class _Work:
    """Mutable working copy used by the elimination routines."""

    def __init__(self, A: MatF, W: int):
        self.spec = A.spec
        self.a = [[x.with_prec(W) for x in r] for r in A.rows]
        self.W = W

    def swap_rows(self, i, j):
        self.a[i], self.a[j] = self.a[j], self.a[i]

    def swap_cols(self, i, j):
        for r in self.a:
            r[i], r[j] = r[j], r[i]

    def add_row(self, dst, src, c):
        # row_dst += c * row_src
        self.a[dst] = [add(x, mul(c, y)) for x, y in zip(self.a[dst], self.a[src])]

    def add_col(self, dst, src, c):
        for r in self.a:
            r[dst] = add(r[dst], mul(c, r[src]))

    def scale_row(self, i, c):
        self.a[i] = [mul(c, x) for x in self.a[i]]

    def scale_col(self, j, c):
        for r in self.a:
            r[j] = mul(c, r[j])


def _lift_prec(A: MatF, extra: int = 0) -> int:
    mv = A.min_val()
    span = A.prec - (mv if mv is not None else 0)
    return A.prec + 2 * max(span, 0) + 8 + extra


def det(A: MatF) -> PadicDigits:
    """Determinant.  For integral inputs the result is known modulo pi^prec."""
    n, c = A.shape
    if n != c:
        raise ValueError("determinant of a non-square matrix")
    s = A.min_val()
    if s is None:
        return PadicDigits.zero(A.spec, A.prec * n)
    B = A.shifted(-s)  # integral, precision prec - s
    W = _lift_prec(B)
    w = _Work(B, W)
    sign = 1
    d = PadicDigits.one(A.spec, W)
    for t in range(n):
        piv = _min_pivot(w.a, t, t, n, n)
        if piv is None:
            return PadicDigits.zero(A.spec, B.prec + n * s)
        i, j = piv
        if i != t:
            w.swap_rows(i, t)
            sign = -sign
        if j != t:
            w.swap_cols(j, t)
            sign = -sign
        p = w.a[t][t]
        d = mul(d, p)
        pinv_unit = inv(p.unit_part())
        for r in range(t + 1, n):
            if w.a[r][t].digits:
                f = neg(mul(w.a[r][t], pinv_unit).shifted(-p.shift))
                w.add_row(r, t, f)
    if sign < 0:
        d = neg(d)
    # integral matrix known mod pi^P has determinant known mod pi^P
    return d.with_prec(B.prec).shifted(n * s)


def val_det(A: MatF) -> int:
    d = det(A)
    if not d.digits:
        raise Singular("determinant indistinguishable from zero", required=A.prec + 1)
    return d.shift


def _min_pivot(a, r0, c0, r1, c1):
    best = None
    for i in range(r0, r1):
        for j in range(c0, c1):
            x = a[i][j]
            if x.digits and (best is None or x.shift < best[0]):
                best = (x.shift, i, j)
    return None if best is None else (best[1], best[2])


def matinv(A: MatF) -> MatF:
    """Inverse with the adjugate precision bound prec - 2 val(det) (after scaling)."""
    n, c = A.shape
    if n != c:
        raise ValueError("inverse of a non-square matrix")
    s = A.min_val()
    if s is None:
        raise Singular("zero matrix", required=A.prec + 1)
    B = A.shifted(-s)
    v = val_det(B)
    out_prec = B.prec - 2 * v
    if out_prec - s <= 0 or out_prec <= 0:
        raise PrecisionLoss(
            f"inverse would be known only mod pi^{out_prec}", required=A.prec - out_prec + 1
        )
    W = _lift_prec(B, 2 * v)
    w = _Work(B, W)
    I = [[PadicDigits.from_int(A.spec, int(i == j), W) for j in range(n)] for i in range(n)]
    aug = [w.a[i] + I[i] for i in range(n)]
    for t in range(n):
        piv = min(
            (i for i in range(t, n) if aug[i][t].digits),
            key=lambda i: aug[i][t].shift,
            default=None,
        )
        if piv is None:
            raise Singular("matrix is singular at working precision", required=A.prec + 1)
        aug[t], aug[piv] = aug[piv], aug[t]
        p = aug[t][t]
        u = inv(p.unit_part())
        aug[t] = [mul(u, x).shifted(-p.shift) for x in aug[t]]
        for r in range(n):
            if r != t and aug[r][t].digits:
                f = neg(aug[r][t])
                aug[r] = [add(x, mul(f, y)) for x, y in zip(aug[r], aug[t])]
    inv_rows = [r[n:] for r in aug]
    for r in inv_rows:
        for x in r:
            if x.prec < out_prec:
                raise PrecisionLoss("working precision exhausted during inversion", required=A.prec + 2 * v + 1)
    return MatF([[x.with_prec(out_prec) for x in r] for r in inv_rows]).shifted(-s)


# Cartan / Smith ---------------------------------------------------------------

@dataclass(frozen=True)
class SmithForm:
    """``A = k1 · D · k2`` with D the rectangular diagonal of pi^lambda.

    ``lam`` entries are None where the diagonal entry is zero at precision.
    """

    k1: MatF
    lam: tuple
    k2: MatF
    prec_certificate: int


@dataclass(frozen=True)
class CartanForm:
    k1: MatF
    lam: tuple
    k2: MatF
    prec_certificate: int

    def diag(self) -> MatF:
        return MatF.diag_pi(self.k1.spec, self.lam, self.k1.prec)


def smith(A: MatF, out_prec: int | None = None) -> SmithForm:
    """Rectangular Smith form with min-valuation pivots (row-major ties)."""
    r, c = A.shape
    spec = A.spec
    W = _lift_prec(A)
    w = _Work(A, W)
    # inverses of the accumulated operations: A = K1 D K2
    K1 = _Work(MatF.identity(spec, r, W), W)
    K2 = _Work(MatF.identity(spec, c, W), W)
    lam = []
    for t in range(min(r, c)):
        piv = _min_pivot(w.a, t, t, r, c)
        if piv is None:
            lam.extend([None] * (min(r, c) - t))
            break
        i, j = piv
        if i != t:
            w.swap_rows(i, t)
            K1.swap_cols(i, t)
        if j != t:
            w.swap_cols(j, t)
            K2.swap_rows(j, t)
        p = w.a[t][t]
        u = p.unit_part()
        uinv = inv(u)
        w.scale_row(t, uinv)
        K1.scale_col(t, u)
        for rr in range(t + 1, r):
            x = w.a[rr][t]
            if x.digits:
                f = x.shifted(-p.shift)
                w.add_row(rr, t, neg(f))
                K1.add_col(t, rr, f)
        for cc in range(t + 1, c):
            x = w.a[t][cc]
            if x.digits:
                f = x.shifted(-p.shift)
                w.add_col(cc, t, neg(f))
                K2.add_row(t, cc, f)
        lam.append(p.shift)
    prec = A.prec if out_prec is None else out_prec
    k1 = MatF(K1.a).with_prec(prec)
    k2 = MatF(K2.a).with_prec(prec)
    z = PadicDigits.zero(spec, W)
    D = MatF(
        [[PadicDigits.pi_power(spec, lam[i], W) if (i == j and lam[i] is not None) else z for j in range(c)] for i in range(r)]
    )
    cert = matmul(matmul(k1, D), k2).agreement(A)
    return SmithForm(k1, tuple(lam), k2, cert)


def cartan(A: MatF, level: int = 0) -> CartanForm:
    """Cartan decomposition ``A = k1 · diag(pi^lambda) · k2``, lambda non-decreasing."""
    n, c = A.shape
    if n != c:
        raise ValueError("cartan needs a square matrix")
    sf = smith(A)
    if any(x is None for x in sf.lam):
        raise Singular("matrix is singular at this precision", required=A.prec + 1)
    lam = sf.lam
    need = lam[-1] - lam[0] + level + 2
    if A.prec < need:
        raise PrecisionLoss(f"cartan needs precision {need}, have {A.prec}", required=need)
    if lam[-1] >= A.prec:
        # the last pivot is not separated from the precision horizon
        raise PrecisionLoss("pivot valuation reaches the precision horizon", required=lam[-1] + level + 2)
    return CartanForm(sf.k1, lam, sf.k2, sf.prec_certificate)


def elementary_divisor_sums(A: MatF):
    """Independent oracle: min valuation over i×i minors, i = 1..n."""
    from itertools import combinations

    n = A.shape[0]
    out = []
    for i in range(1, n + 1):
        best = None
        for rs in combinations(range(n), i):
            for cs in combinations(range(n), i):
                d = det(MatF([[A.rows[r][cc] for cc in cs] for r in rs]))
                if d.digits and (best is None or d.shift < best):
                    best = d.shift
        out.append(best)
    return out


# congruence subgroups -----------------------------------------------------------

def in_congruence(A: MatF, level: int) -> bool:
    """Membership in K_level (K_0 = GL_n(O))."""
    n, c = A.shape
    if n != c or not A.is_integral():
        return False
    if level == 0:
        d = det(A)
        return d.is_unit()
    for i in range(n):
        for j in range(n):
            x = A.rows[i][j]
            if i == j:
                x = sub(x, PadicDigits.one(A.spec, x.prec))
            if x.digits and x.shift < level:
                return False
            if not x.digits and x.prec < level:
                return False
    return True


def lu_congruence(D: MatF, level: int):
    """Doolittle ``D = L U`` for D in K_level, level >= 1."""
    if level < 1 or not in_congruence(D, level):
        raise NotInCongruenceSubgroup(f"matrix is not in K_{level}")
    n = D.n
    spec = D.spec
    prec = D.prec
    one = PadicDigits.one(spec, prec)
    zero = PadicDigits.zero(spec, prec)
    L = [[one if i == j else zero for j in range(n)] for i in range(n)]
    U = [[zero] * n for _ in range(n)]
    a = D.rows
    for i in range(n):
        for j in range(i, n):
            s = a[i][j]
            for t in range(i):
                s = sub(s, mul(L[i][t], U[t][j]))
            U[i][j] = s
        uinv = inv(U[i][i])
        for r in range(i + 1, n):
            s = a[r][i]
            for t in range(i):
                s = sub(s, mul(L[r][t], U[t][i]))
            L[r][i] = mul(s, uinv)
    return MatF(L).with_prec(prec), MatF(U).with_prec(prec)


# finite reductions ---------------------------------------------------------------

def reduce_mod(A: MatF, m: int, lo: int = 0) -> np.ndarray:
    """Code matrix of the digits at positions lo..lo+m-1 of every entry.

    Requires every entry to have valuation >= lo and precision >= lo + m.
    """
    out = np.zeros(A.shape, dtype=np.int64)
    for i, r in enumerate(A.rows):
        for j, x in enumerate(r):
            if x.prec < lo + m:
                raise PrecisionLoss(f"entry known only mod pi^{x.prec}", required=lo + m)
            if x.digits and x.shift < lo:
                raise PrecisionLoss(f"entry has valuation {x.shift} below the window floor {lo}", required=lo + m)
            out[i, j] = x.code(m, lo)
    return out


def codes_to_integers(codes, p: int, m: int) -> np.ndarray:
    """Little-endian reading sum d_i p^i of code matrices (the Z/p^m value when e = 1)."""
    codes = np.asarray(codes, dtype=np.int64)
    out = np.zeros_like(codes)
    c = codes.copy()
    for i in range(m - 1, -1, -1):
        out += (c % p) * p**i
        c //= p
    return out


def matrix_key(codes) -> tuple:
    return tuple(int(x) for x in np.asarray(codes).ravel())


# literals ------------------------------------------------------------------------

_SHORT = re.compile(
    r"^\s*(?P<sign>[+-])?\s*(?P<coef>\d+)?\s*\*?\s*(?P<pi>π|pi|t)?\s*(?:\^\s*(?P<exp>[+-]?\d+))?\s*$"
)


def parse_entry(text: str, spec: RingSpec | None, prec: int | None) -> PadicDigits:
    text = text.strip()
    if text.count(":") == 4:
        return parse_literal(text)
    m = _SHORT.match(text)
    if not m or (m.group("coef") is None and m.group("pi") is None):
        raise ParseError(f"cannot parse matrix entry {text!r}")
    if m.group("exp") is not None and m.group("pi") is None:
        raise ParseError(f"exponent without uniformizer in {text!r}")
    if spec is None or prec is None:
        raise ParseError(f"shorthand entry {text!r} needs a ring spec and precision")
    coef = int(m.group("coef")) if m.group("coef") is not None else 1
    if m.group("sign") == "-":
        coef = -coef
    k = 0
    if m.group("pi") is not None:
        k = int(m.group("exp")) if m.group("exp") is not None else 1
    return PadicDigits.from_int(spec, coef, prec - k).shifted(k) if k else PadicDigits.from_int(spec, coef, prec)


def parse_matrix(text: str, spec: RingSpec | None = None, prec: int | None = None) -> MatF:
    """Row-major literal, rows split by ';' and entries by ','.

    Entries are element literals ``p:e:shift:digits:prec`` or shorthands such as
    ``3``, ``-1``, ``π``, ``pi^2``, ``2t^-1`` (these need ``spec`` and ``prec``).
    A single row of n entries with no ';' and n > 1 is read as a diagonal.
    """
    if not text or not text.strip():
        raise ParseError("empty matrix literal")
    rows = [r for r in text.split(";")]
    try:
        ent = [[parse_entry(x, spec, prec) for x in r.split(",")] for r in rows]
    except ParseError:
        raise
    except Exception as exc:  # pragma: no cover - defensive
        raise ParseError(f"bad matrix literal {text!r}: {exc}") from exc
    if len(ent) == 1 and len(ent[0]) > 1:
        d = ent[0]
        z = PadicDigits.zero(d[0].spec, min(x.prec for x in d))
        ent = [[d[i] if i == j else z for j in range(len(d))] for i in range(len(d))]
    if any(len(r) != len(ent[0]) for r in ent):
        raise ParseError("rows of unequal length")
    try:
        return MatF(ent)
    except (ValueError, SpecMismatch) as exc:
        raise ParseError(str(exc)) from exc


def format_matrix(A: MatF) -> str:
    from .local_ring import format_literal

    return ";".join(",".join(format_literal(x) for x in r) for r in A.rows)


__all__ = [
    "INF",
    "MatF",
    "CartanForm",
    "SmithForm",
    "matmul",
    "matinv",
    "det",
    "val_det",
    "cartan",
    "smith",
    "lu_congruence",
    "in_congruence",
    "reduce_mod",
    "parse_matrix",
    "format_matrix",
    "block_matrix",
    "block_diag",
    "elementary_divisor_sums",
    "divide",
]
