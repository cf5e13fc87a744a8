"""Finite-level Hecke algebras and Hecke modules with exact rational coefficients.

Basis elements are the probability-normalized measures 1_{K g K} (algebra) and
1_{K x} (module), so the mass of a vector is the sum of its coefficients.

For K g K = disjoint union of right cosets K a_1, ..., K a_r:

    1_{KgK} * 1_{KhK} = (1/r) sum_i 1_{K a_i h K}
    1_{KgK} . 1_{Kx}  = (1/r) sum_i 1_{K a_i x}

Groups are products of GL factors, so a Hecke key is a tuple with one
DoubleCosetKey per factor.  For the diagonal pair the group is
GL_{n+1} x GL_n acting by (a, b) . X = a X iota(b)^-1.
"""
from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .coset_enum import DEFAULT_BUDGET, DoubleCosetKey, double_coset_key, keys_of_cell, right_reps_of_key
from .dvr_linalg import MatF, matmul
from .errors import InsufficientCloseness, NotNClose, SpecMismatch, WindowOverflow
from .local_ring import PadicDigits, RingSpec, carry_rules_agree, phi_transfer
from .spherical_pairs import CanonicalPoint, PairDescriptor, canonical_point, points_of_cell

DEFAULT_RADIUS = 4


def _work_prec(radius: int, level: int) -> int:
    # inputs are exact digit lifts, so this only has to cover the moduli in play
    return 2 * radius + level + 4


def _check_radius(entries, radius, what):
    if radius is not None and any(abs(x) > radius for x in entries):
        raise WindowOverflow(f"{what} {list(entries)} leaves the window of radius {radius}")


def _normalize(terms) -> tuple:
    return tuple(sorted((k, Fraction(c)) for k, c in terms.items() if c != 0))


# vectors ---------------------------------------------------------------------------------

@dataclass(frozen=True)
class HeckeVector:
    level: int
    spec: RingSpec
    dims: tuple
    terms: tuple = ()

    @classmethod
    def make(cls, level, spec, dims, coeffs):
        dims = tuple(dims)
        for key in coeffs:
            if len(key) != len(dims) or any(k.level != level or k.n != d for k, d in zip(key, dims)):
                raise SpecMismatch(f"key {key} does not belong to level {level} and group {dims}")
        return cls(level, spec, dims, _normalize(coeffs))

    @classmethod
    def basis(cls, key, spec):
        key = (key,) if isinstance(key, DoubleCosetKey) else tuple(key)
        return cls.make(key[0].level, spec, tuple(k.n for k in key), {key: 1})

    @classmethod
    def identity(cls, dims, level, spec):
        dims = (dims,) if isinstance(dims, int) else tuple(dims)
        return cls.basis(tuple(identity_key(d, level, spec) for d in dims), spec)

    def coeffs(self) -> dict:
        return dict(self.terms)

    def mass(self) -> Fraction:
        return sum((c for _, c in self.terms), Fraction(0))

    def _check(self, other):
        if (self.level, self.spec, self.dims) != (other.level, other.spec, other.dims):
            raise SpecMismatch("Hecke vectors differ in level, ring or group")

    def __add__(self, other):
        self._check(other)
        acc = defaultdict(Fraction, self.terms)
        for k, c in other.terms:
            acc[k] += c
        return HeckeVector(self.level, self.spec, self.dims, _normalize(acc))

    def scale(self, c):
        c = Fraction(c)
        return HeckeVector(self.level, self.spec, self.dims, _normalize({k: v * c for k, v in self.terms}))

    def __sub__(self, other):
        return self + other.scale(-1)

    def to_json(self):
        return {
            "level": self.level,
            "spec": str(self.spec),
            "group": list(self.dims),
            "terms": [
                {"key": [k.to_json() for k in key], "coeff_num": c.numerator, "coeff_den": c.denominator}
                for key, c in self.terms
            ],
            "mass": str(self.mass()),
        }

    @classmethod
    def from_json(cls, d):
        spec = RingSpec.parse(d["spec"])
        terms = {}
        for t in d["terms"]:
            key = tuple(DoubleCosetKey.from_json(k) for k in t["key"])
            terms[key] = terms.get(key, Fraction(0)) + Fraction(int(t["coeff_num"]), int(t["coeff_den"]))
        return cls.make(int(d["level"]), spec, tuple(d["group"]), terms)


@dataclass(frozen=True)
class ModuleVector:
    level: int
    spec: RingSpec
    pair: str
    terms: tuple = ()

    @classmethod
    def make(cls, level, spec, pair, coeffs):
        pair = str(pair)
        for pt in coeffs:
            if pt.pair != pair or pt.level != level:
                raise SpecMismatch(f"point {pt} does not belong to {pair} at level {level}")
        return cls(level, spec, pair, _normalize(coeffs))

    @classmethod
    def basis(cls, point: CanonicalPoint, spec):
        return cls.make(point.level, spec, point.pair, {point: 1})

    @classmethod
    def from_matrix(cls, pair: PairDescriptor, X: MatF, level: int, budget=DEFAULT_BUDGET):
        return cls.basis(canonical_point(pair, X, level, budget), X.spec)

    def coeffs(self) -> dict:
        return dict(self.terms)

    def mass(self) -> Fraction:
        return sum((c for _, c in self.terms), Fraction(0))

    def _check(self, other):
        if (self.level, self.spec, self.pair) != (other.level, other.spec, other.pair):
            raise SpecMismatch("module vectors differ in level, ring or pair")

    def __add__(self, other):
        self._check(other)
        acc = defaultdict(Fraction, self.terms)
        for k, c in other.terms:
            acc[k] += c
        return ModuleVector(self.level, self.spec, self.pair, _normalize(acc))

    def scale(self, c):
        c = Fraction(c)
        return ModuleVector(self.level, self.spec, self.pair, _normalize({k: v * c for k, v in self.terms}))

    def __sub__(self, other):
        return self + other.scale(-1)

    def to_json(self):
        p = self.spec.p
        return {
            "level": self.level,
            "spec": str(self.spec),
            "pair": self.pair,
            "terms": [
                {"key": pt.to_json(p), "coeff_num": c.numerator, "coeff_den": c.denominator}
                for pt, c in self.terms
            ],
            "mass": str(self.mass()),
        }

    @classmethod
    def from_json(cls, d):
        spec = RingSpec.parse(d["spec"])
        terms = {}
        for t in d["terms"]:
            pt = CanonicalPoint.from_json(t["key"], spec.p)
            terms[pt] = terms.get(pt, Fraction(0)) + Fraction(int(t["coeff_num"]), int(t["coeff_den"]))
        return cls.make(int(d["level"]), spec, d["pair"], terms)


def vector_from_json(d):
    return ModuleVector.from_json(d) if "pair" in d else HeckeVector.from_json(d)


# basis operations ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def identity_key(n: int, level: int, spec: RingSpec) -> DoubleCosetKey:
    return double_coset_key(MatF.identity(spec, n, 24), level)


@lru_cache(maxsize=None)
def _right_reps(key: DoubleCosetKey, spec: RingSpec, prec: int, budget: int):
    return tuple(right_reps_of_key(key, spec, prec, budget))


@lru_cache(maxsize=200_000)
def _convolve_factor(k1: DoubleCosetKey, k2: DoubleCosetKey, spec: RingSpec, radius, budget):
    prec = _work_prec(radius or DEFAULT_RADIUS, k1.level)
    reps = _right_reps(k1, spec, prec, budget)
    h = k2.representative(spec, prec)
    acc = defaultdict(Fraction)
    w = Fraction(1, len(reps))
    for a in reps:
        key = double_coset_key(matmul(a, h), k1.level, budget=budget)
        _check_radius(key.lam, radius, "product cell")
        acc[key] += w
    return tuple(sorted(acc.items()))


def convolve_basis(key1: tuple, key2: tuple, spec: RingSpec, radius=DEFAULT_RADIUS, budget=DEFAULT_BUDGET) -> dict:
    """1_{K key1 K} * 1_{K key2 K}, factor by factor."""
    parts = [_convolve_factor(a, b, spec, radius, budget) for a, b in zip(key1, key2)]
    out = {}
    for combo in itertools.product(*parts):
        c = Fraction(1)
        for _, x in combo:
            c *= x
        out[tuple(k for k, _ in combo)] = c
    return out


def convolve(f: HeckeVector, g: HeckeVector, radius=DEFAULT_RADIUS, budget=DEFAULT_BUDGET) -> HeckeVector:
    f._check(g)
    acc = defaultdict(Fraction)
    for k1, c1 in f.terms:
        for k2, c2 in g.terms:
            for k, c in convolve_basis(k1, k2, f.spec, radius, budget).items():
                acc[k] += c1 * c2 * c
    return HeckeVector(f.level, f.spec, f.dims, _normalize(acc))


@lru_cache(maxsize=200_000)
def _act_basis(key: tuple, point: CanonicalPoint, spec: RingSpec, radius, budget):
    pair = point.descriptor
    prec = _work_prec(radius or DEFAULT_RADIUS, point.level)
    X = point.representative(spec, prec)
    reps = [_right_reps(k, spec, prec, budget) for k in key]
    combos = list(itertools.product(*reps))
    w = Fraction(1, len(combos))
    acc = defaultdict(Fraction)
    for combo in combos:
        pt = canonical_point(pair, pair.act(combo, X), point.level, budget)
        _check_radius(pt.delta, radius, "image cell")
        acc[pt] += w
    return tuple(sorted(acc.items()))


def act(f: HeckeVector, v: ModuleVector, radius=DEFAULT_RADIUS, budget=DEFAULT_BUDGET) -> ModuleVector:
    dims = PairDescriptor.parse(v.pair).group_dims
    if (f.level, f.spec, f.dims) != (v.level, v.spec, dims):
        raise SpecMismatch(f"Hecke vector on {f.dims} at level {f.level} cannot act on {v.pair} at level {v.level}")
    acc = defaultdict(Fraction)
    for key, c1 in f.terms:
        for pt, c2 in v.terms:
            for q, c in _act_basis(key, pt, f.spec, radius, budget):
                acc[q] += c1 * c2 * c
    return ModuleVector(v.level, v.spec, v.pair, _normalize(acc))


# transfer ---------------------------------------------------------------------------------

def check_close(spec1: RingSpec, spec2: RingSpec, n: int):
    if spec1.p != spec2.p or not carry_rules_agree(spec1.e, spec2.e, n):
        raise NotNClose(f"{spec1} and {spec2} are not {n}-close")


def _move_codes(codes, level, spec1, spec2):
    """Digit-identity transport of O/pi^level codes."""
    out = []
    for c in codes:
        x = PadicDigits.from_code(spec1, int(c), level)
        out.append(phi_transfer(x, spec2, level).code(level))
    return tuple(out)


def _move_key(key: DoubleCosetKey, spec1, spec2):
    if key.level == 0:
        return key
    return DoubleCosetKey(key.lam, key.level, _move_codes(key.k1, key.level, spec1, spec2), _move_codes(key.k2, key.level, spec1, spec2))


def transfer_hecke(f: HeckeVector, spec2: RingSpec, n: int, strict: bool = True) -> HeckeVector:
    """Move f to spec2 key by key.  ``strict`` demands n >= every key's modulus;
    without it the map is the basis correspondence on labels."""
    check_close(f.spec, spec2, n)
    out = {}
    for key, c in f.terms:
        if strict:
            need = max(k.modulus for k in key)
            if need > n:
                raise InsufficientCloseness(f"key {[str(k) for k in key]} needs {need}-closeness, have {n}")
        out[tuple(_move_key(k, f.spec, spec2) for k in key)] = c
    return HeckeVector(f.level, spec2, f.dims, _normalize(out))


def transfer_module(v: ModuleVector, spec2: RingSpec, n: int, strict: bool = True) -> ModuleVector:
    check_close(v.spec, spec2, n)
    out = {}
    for pt, c in v.terms:
        if strict and pt.modulus() > n:
            raise InsufficientCloseness(f"point {pt} needs {pt.modulus()}-closeness, have {n}")
        key = tuple(_move_codes(k, pt.level, v.spec, spec2) for k in pt.coset_key)
        out[CanonicalPoint(pt.pair, pt.delta, pt.level, key)] = c
    return ModuleVector(v.level, spec2, v.pair, _normalize(out))


# windows ----------------------------------------------------------------------------------

def _as_cell(cell, dims):
    if len(dims) == 1 and cell and not isinstance(cell[0], (tuple, list)):
        cell = (cell,)
    return tuple(tuple(int(x) for x in lam) for lam in cell)


def hecke_window_basis(dims, cells, level, spec, budget=DEFAULT_BUDGET):
    """Basis keys of the Hecke algebra over every cell in the window."""
    dims = (dims,) if isinstance(dims, int) else tuple(dims)
    out = []
    for cell in cells:
        cell = _as_cell(cell, dims)
        per = [keys_of_cell(lam, level, spec, budget) for lam in cell]
        out.extend(itertools.product(*per))
    return out


def module_window_basis(pair: PairDescriptor, deltas, level, spec, budget=DEFAULT_BUDGET):
    out = []
    for d in deltas:
        out.extend(points_of_cell(pair, tuple(d), level, spec, budget))
    return out


def _diff_json(lhs, rhs):
    d = (lhs - rhs).to_json()
    return {"lhs": lhs.to_json(), "rhs": rhs.to_json(), "diff": d["terms"]}


def verify_algebra_transfer(spec1, spec2, level, cells, dims=2, n=None, radius=DEFAULT_RADIUS, budget=DEFAULT_BUDGET):
    """Check Phi(f * g) = Phi(f) * Phi(g) for every pair of window basis elements.

    Window inputs go through the strict transfer; products may need more
    closeness than the window does and are matched through the basis map.
    """
    dims = (dims,) if isinstance(dims, int) else tuple(dims)
    basis = hecke_window_basis(dims, cells, level, spec1, budget)
    need = max(max(k.modulus for k in key) for key in basis)
    n = need if n is None else n
    check_close(spec1, spec2, n)
    fs = [HeckeVector.basis(k, spec1) for k in basis]
    moved = [transfer_hecke(f, spec2, n) for f in fs]
    failures = []
    constants = []
    checked = 0
    for (f, F), (g, G) in itertools.product(zip(fs, moved), repeat=2):
        prod = convolve(f, g, radius, budget)
        lhs = transfer_hecke(prod, spec2, n, strict=False)
        rhs = convolve(F, G, radius, budget)
        checked += 1
        constants.append(len(prod.terms))
        if lhs != rhs:
            failures.append(_diff_json(lhs, rhs))
    return {
        "mode": "algebra",
        "n": n,
        "basis_size": len(basis),
        "checked": checked,
        "passed": checked - len(failures),
        "structure_terms": sum(constants),
        "failures": failures,
    }


def verify_module_transfer(pair, spec1, spec2, level, cells, deltas, n=None, radius=DEFAULT_RADIUS, budget=DEFAULT_BUDGET):
    """Check Phi_M(f . v) = Phi_H(f) . Phi_M(v) for every window pair (f, v)."""
    pair = PairDescriptor.parse(pair) if isinstance(pair, str) else pair
    dims = pair.group_dims
    hb = hecke_window_basis(dims, cells, level, spec1, budget)
    mb = module_window_basis(pair, deltas, level, spec1, budget)
    need = max([max(k.modulus for k in key) for key in hb] + [pt.modulus() for pt in mb])
    n = need if n is None else n
    check_close(spec1, spec2, n)
    fs = [HeckeVector.basis(k, spec1) for k in hb]
    Fs = [transfer_hecke(f, spec2, n) for f in fs]
    vs = [ModuleVector.basis(pt, spec1) for pt in mb]
    Vs = [transfer_module(v, spec2, n) for v in vs]
    failures = []
    checked = 0
    for f, F in zip(fs, Fs):
        for v, V in zip(vs, Vs):
            lhs = transfer_module(act(f, v, radius, budget), spec2, n, strict=False)
            rhs = act(F, V, radius, budget)
            checked += 1
            if lhs != rhs:
                failures.append(_diff_json(lhs, rhs))
    return {
        "mode": "module",
        "pair": str(pair),
        "n": n,
        "hecke_basis_size": len(hb),
        "module_basis_size": len(mb),
        "checked": checked,
        "passed": checked - len(failures),
        "failures": failures,
    }
