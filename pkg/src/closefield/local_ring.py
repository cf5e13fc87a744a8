"""Truncated arithmetic in the valuation rings O/pi^N.

Two families of rings are modelled, both with residue field F_p:

* ``RingSpec(p, e)`` with ``e`` finite: the integers of Q_p(p^(1/e)), uniformizer
  pi with pi^e = p.  A carry produced at digit position i lands at i + e.
* ``RingSpec(p, INF)``: F_p[[t]] with pi = t.  No carries.

An element is a base-p digit string ``d_0 d_1 ...`` standing for
``sum d_i pi^(shift + i)``, known modulo ``pi^prec``.  Digits are always fully
normalized, so equality modulo pi^m is digit-string equality.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import NotAUnit, NotNClose, ParseError, PrecisionLoss, SpecMismatch

INF = math.inf


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    f = 2
    while f * f <= n:
        if n % f == 0:
            return False
        f += 1
    return True


@dataclass(frozen=True)
class RingSpec:
    p: int
    e: float  # positive int, or INF for equal characteristic

    def __post_init__(self):
        if not _is_prime(self.p):
            raise ParseError(f"p={self.p} is not prime")
        if self.e != INF and (int(self.e) != self.e or self.e < 1):
            raise ParseError(f"ramification index must be a positive integer or INF, got {self.e}")
        if self.e != INF:
            object.__setattr__(self, "e", int(self.e))

    @property
    def equal_char(self) -> bool:
        return self.e == INF

    def __str__(self):
        return f"{self.p}:{'INF' if self.e == INF else self.e}"

    @classmethod
    def parse(cls, text: str) -> "RingSpec":
        try:
            p, e = text.split(":")
            return cls(int(p), parse_e(e))
        except (ValueError, TypeError) as exc:
            raise ParseError(f"bad ring spec {text!r}") from exc


def parse_e(text) -> float:
    if isinstance(text, (int, float)):
        return text
    if text.strip().upper() in ("INF", "INFINITY"):
        return INF
    return int(text)


@dataclass(frozen=True)
class AtLeast:
    """Valuation of an element that is zero at its known precision."""

    bound: int

    def __repr__(self):
        return f"AtLeast({self.bound})"


def _carry(spec: RingSpec, start: int, coeffs: list, prec: int) -> "PadicDigits":
    """Turn raw integer coefficients at positions start, start+1, ... into digits."""
    p = spec.p
    stop = prec - start
    if stop <= 0:
        return PadicDigits._make(spec, prec, (), prec)
    if len(coeffs) > stop:
        coeffs = coeffs[:stop]
    if spec.e == INF:
        digs = [c % p for c in coeffs]
    else:
        e = spec.e
        digs = list(coeffs)
        i = 0
        while i < len(digs):
            c = digs[i]
            if not 0 <= c < p:
                d = c % p
                digs[i] = d
                j = i + e
                if j < stop:
                    if j >= len(digs):
                        digs.extend([0] * (j - len(digs) + 1))
                    digs[j] += (c - d) // p
            i += 1
    k = 0
    n = len(digs)
    while k < n and digs[k] == 0:
        k += 1
    if k == n:
        return PadicDigits._make(spec, prec, (), prec)
    end = n
    while digs[end - 1] == 0:
        end -= 1
    return PadicDigits._make(spec, start + k, tuple(digs[k:end]), prec)


class PadicDigits:
    """Element of a truncated local field, ``sum d_i pi^(shift+i) mod pi^prec``.

    Instances are immutable.  Zero (at the known precision) has empty digits and
    ``shift == prec``.
    """

    __slots__ = ("spec", "shift", "digits", "prec", "_hash")

    def __init__(self, spec: RingSpec, digits: Sequence[int] = (), shift: int = 0, prec: int = 20):
        # out-of-range digits are accepted and carried
        other = _carry(spec, shift, list(digits), prec)
        self._set(other.spec, other.shift, other.digits, other.prec)

    def _set(self, spec, shift, digits, prec):
        object.__setattr__(self, "spec", spec)
        object.__setattr__(self, "shift", shift)
        object.__setattr__(self, "digits", digits)
        object.__setattr__(self, "prec", prec)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("PadicDigits is immutable")

    @classmethod
    def _make(cls, spec, shift, digits, prec):
        obj = object.__new__(cls)
        obj._set(spec, shift, digits, prec)
        return obj

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, spec: RingSpec, prec: int) -> "PadicDigits":
        return cls._make(spec, prec, (), prec)

    @classmethod
    def one(cls, spec: RingSpec, prec: int) -> "PadicDigits":
        return cls.from_int(spec, 1, prec)

    @classmethod
    def pi_power(cls, spec: RingSpec, k: int, prec: int) -> "PadicDigits":
        if k >= prec:
            return cls.zero(spec, prec)
        return cls._make(spec, k, (1,), prec)

    @classmethod
    def from_int(cls, spec: RingSpec, n: int, prec: int) -> "PadicDigits":
        if spec.e == INF:
            return _carry(spec, 0, [n % spec.p], prec)
        if n == 0:
            return cls.zero(spec, prec)
        # n = sum n_j p^j = sum n_j pi^(j e)
        coeffs = []
        m = n
        j = 0
        e = spec.e
        while m != 0 and j * e < prec:
            d = m % spec.p
            coeffs.extend([d] + [0] * (e - 1))
            m = (m - d) // spec.p
            j += 1
        return _carry(spec, 0, coeffs, prec)

    @classmethod
    def from_code(cls, spec: RingSpec, code: int, m: int, shift: int = 0, prec: int | None = None):
        """Inverse of :meth:`code`: big-endian base-p integer of m digits."""
        digs = []
        for _ in range(m):
            digs.append(code % spec.p)
            code //= spec.p
        digs.reverse()
        return _carry(spec, shift, digs, shift + m if prec is None else prec)

    # inspection ----------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.digits

    def val(self):
        """Valuation, or ``AtLeast(prec)`` when indistinguishable from zero."""
        if not self.digits:
            return AtLeast(self.prec)
        return self.shift

    def val_or_prec(self) -> int:
        return self.shift

    def digit(self, pos: int) -> int:
        i = pos - self.shift
        if 0 <= i < len(self.digits):
            return self.digits[i]
        return 0

    def digit_window(self, lo: int, hi: int) -> tuple:
        return tuple(self.digit(i) for i in range(lo, hi))

    def code(self, m: int, lo: int = 0) -> int:
        """Big-endian base-p integer of the digits at positions lo..lo+m-1.

        Integer order on codes equals lexicographic order on digit strings.
        """
        c = 0
        p = self.spec.p
        for i in range(lo, lo + m):
            c = c * p + self.digit(i)
        return c

    def is_integral(self) -> bool:
        return not self.digits or self.shift >= 0

    def is_unit(self) -> bool:
        return bool(self.digits) and self.shift == 0

    # comparison ----------------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, int):
            other = PadicDigits.from_int(self.spec, other, self.prec)
        if not isinstance(other, PadicDigits):
            return NotImplemented
        return (
            self.spec == other.spec
            and self.prec == other.prec
            and self.shift == other.shift
            and self.digits == other.digits
        )

    def __hash__(self):
        if self._hash is None:
            object.__setattr__(self, "_hash", hash((self.spec, self.shift, self.digits, self.prec)))
        return self._hash

    def equal_mod(self, other: "PadicDigits", m: int) -> bool:
        if m > min(self.prec, other.prec):
            raise PrecisionLoss(f"cannot compare modulo pi^{m}", required=m)
        return truncate(self, m).digits == truncate(other, m).digits and (
            truncate(self, m).shift == truncate(other, m).shift
        )

    def __repr__(self):
        return f"PadicDigits({format_literal(self)})"

    # arithmetic ----------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, PadicDigits):
            if other.spec != self.spec:
                raise SpecMismatch(f"{self.spec} vs {other.spec}")
            return other
        if isinstance(other, int):
            return PadicDigits.from_int(self.spec, other, self.prec + abs(self.shift) + 64)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return sub(self, other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return sub(other, self)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return divide(self, other)

    def shifted(self, k: int) -> "PadicDigits":
        """Multiply by pi^k exactly."""
        return PadicDigits._make(self.spec, self.shift + k, self.digits, self.prec + k)

    def with_prec(self, prec: int) -> "PadicDigits":
        """Lower the precision, or declare a digit lift exact up to ``prec``."""
        return _carry(self.spec, self.shift, list(self.digits), prec)

    def unit_part(self) -> "PadicDigits":
        if not self.digits:
            raise NotAUnit("zero has no unit part", required=self.prec + 1)
        return self.shifted(-self.shift)


def _check(a: PadicDigits, b: PadicDigits):
    if a.spec != b.spec:
        raise SpecMismatch(f"{a.spec} vs {b.spec}")


def add(a: PadicDigits, b: PadicDigits) -> PadicDigits:
    _check(a, b)
    prec = min(a.prec, b.prec)
    if not a.digits:
        return b.with_prec(prec) if b.prec != prec else b
    if not b.digits:
        return a.with_prec(prec) if a.prec != prec else a
    start = min(a.shift, b.shift)
    n = max(a.shift + len(a.digits), b.shift + len(b.digits)) - start
    coeffs = [0] * n
    o = a.shift - start
    for i, d in enumerate(a.digits):
        coeffs[o + i] += d
    o = b.shift - start
    for i, d in enumerate(b.digits):
        coeffs[o + i] += d
    return _carry(a.spec, start, coeffs, prec)


def neg(a: PadicDigits) -> PadicDigits:
    if not a.digits:
        return a
    return _carry(a.spec, a.shift, [-d for d in a.digits], a.prec)


def sub(a: PadicDigits, b: PadicDigits) -> PadicDigits:
    _check(a, b)
    prec = min(a.prec, b.prec)
    if not b.digits:
        return a.with_prec(prec) if a.prec != prec else a
    start = min(a.shift, b.shift) if a.digits else b.shift
    n = max(a.shift + len(a.digits) if a.digits else start, b.shift + len(b.digits)) - start
    coeffs = [0] * n
    if a.digits:
        o = a.shift - start
        for i, d in enumerate(a.digits):
            coeffs[o + i] += d
    o = b.shift - start
    for i, d in enumerate(b.digits):
        coeffs[o + i] -= d
    return _carry(a.spec, start, coeffs, prec)


def mul(a: PadicDigits, b: PadicDigits) -> PadicDigits:
    _check(a, b)
    va = a.shift  # for zero this is prec, i.e. the AtLeast bound
    vb = b.shift
    prec = min(a.prec + vb, b.prec + va)
    if not a.digits or not b.digits:
        return PadicDigits.zero(a.spec, prec)
    start = va + vb
    keep = prec - start
    if keep <= 0:
        return PadicDigits.zero(a.spec, prec)
    da = a.digits[:keep]
    db = b.digits[:keep]
    if len(da) == 1:
        coeffs = [da[0] * d for d in db]
    elif len(db) == 1:
        coeffs = [db[0] * d for d in da]
    else:
        coeffs = np.convolve(np.asarray(da, dtype=np.int64), np.asarray(db, dtype=np.int64)).tolist()
    return _carry(a.spec, start, coeffs, prec)


def val(a: PadicDigits):
    return a.val()


_INV_CACHE: dict = {}


def inv(a: PadicDigits) -> PadicDigits:
    """Inverse of a unit modulo pi^prec by Newton steps x <- x (2 - a x)."""
    if not a.digits or a.shift != 0:
        raise NotAUnit(f"{format_literal(a)} is not a unit", required=a.prec + 1)
    key = (a.spec, a.digits, a.prec)
    hit = _INV_CACHE.get(key)
    if hit is None:
        if len(_INV_CACHE) > 100_000:
            _INV_CACHE.clear()
        hit = _INV_CACHE[key] = _newton_inv(a)
    return hit


def _newton_inv(a: PadicDigits) -> PadicDigits:
    spec, prec = a.spec, a.prec
    x = PadicDigits._make(spec, 0, (pow(a.digits[0], -1, spec.p),), 1)
    k = 1
    while k < prec:
        k = min(2 * k, prec)
        xk = x.with_prec(k)
        ax = mul(a.with_prec(k), xk)
        x = mul(xk, sub(PadicDigits.from_int(spec, 2, k), ax))
    return x.with_prec(prec)


def divide(a: PadicDigits, b: PadicDigits) -> PadicDigits:
    """Exact quotient a / b for b with determined valuation."""
    _check(a, b)
    if not b.digits:
        raise NotAUnit("division by an element indistinguishable from zero", required=b.prec + 1)
    v = b.shift
    u = inv(b.shifted(-v))
    return mul(a, u).shifted(-v)


def truncate(a: PadicDigits, m: int) -> PadicDigits:
    """Reduce modulo pi^m (the map res_m)."""
    if m > a.prec:
        raise PrecisionLoss(f"cannot truncate to pi^{m}: known only mod pi^{a.prec}", required=m)
    return _carry(a.spec, a.shift, list(a.digits), m) if a.digits else PadicDigits.zero(a.spec, m)


def carry_rules_agree(e1, e2, n: int) -> bool:
    return e1 == e2 or n <= min(e1, e2)


def phi_transfer(a: PadicDigits, target: RingSpec, n: int) -> PadicDigits:
    """The closeness isomorphism O_F/pi^n -> O_E/pi^n on digit strings."""
    if a.spec.p != target.p:
        raise NotNClose(f"residue characteristics differ: {a.spec.p} vs {target.p}")
    if n > a.prec:
        raise PrecisionLoss(f"element known only mod pi^{a.prec}, transfer needs {n}", required=n)
    width = n - min(0, a.shift)
    if not carry_rules_agree(a.spec.e, target.e, width):
        raise NotNClose(f"{a.spec} and {target} are not {width}-close")
    t = truncate(a, n)
    return PadicDigits._make(target, t.shift, t.digits, n) if t.digits else PadicDigits.zero(target, n)


# literals -----------------------------------------------------------------

def format_literal(a: PadicDigits) -> str:
    sep = "" if a.spec.p <= 10 else ","
    digits = sep.join(str(d) for d in a.digits) if a.digits else "0"
    shift = a.shift if a.digits else 0
    return f"{a.spec}:{shift}:{digits}:{a.prec}"


def parse_literal(text: str) -> PadicDigits:
    """Parse ``p:e:shift:digits:prec``; e.g. ``2:INF:0:101:4`` is 1 + t^2 mod t^4."""
    parts = text.strip().split(":")
    if len(parts) != 5:
        raise ParseError(f"expected p:e:shift:digits:prec, got {text!r}")
    try:
        spec = RingSpec(int(parts[0]), parse_e(parts[1]))
        shift = int(parts[2])
        prec = int(parts[4])
        raw = parts[3]
        digits = [int(x) for x in (raw.split(",") if "," in raw else raw)]
    except (ValueError, TypeError) as exc:
        raise ParseError(f"bad element literal {text!r}: {exc}") from exc
    if any(not 0 <= d < spec.p for d in digits):
        raise ParseError(f"digit out of range in {text!r}")
    if shift + len(digits) > prec and any(digits[max(0, prec - shift):]):
        raise ParseError(f"digits beyond the precision horizon in {text!r}")
    return PadicDigits(spec, digits, shift, prec)


def from_digit_codes(spec: RingSpec, codes: Iterable[int], m: int, prec: int):
    return [PadicDigits.from_code(spec, c, m, 0, prec) for c in codes]
