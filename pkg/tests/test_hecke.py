import random
from collections import Counter
from fractions import Fraction

import pytest

from closefield.coset_enum import DoubleCosetKey, double_coset_key, keys_of_cell, left_coset_reps
from closefield.dvr_linalg import MatF, cartan, matmul
from closefield.errors import InsufficientCloseness, NotNClose, SpecMismatch, WindowOverflow
from closefield.hecke import (
    HeckeVector,
    ModuleVector,
    act,
    convolve,
    hecke_window_basis,
    module_window_basis,
    transfer_hecke,
    transfer_module,
    vector_from_json,
    verify_algebra_transfer,
)
from closefield.local_ring import INF, RingSpec
from closefield.spherical_pairs import PairDescriptor, points_of_cell

S2 = RingSpec(2, INF)
S24 = RingSpec(2, 4)


def basis(mat_or_key, spec, level=None):
    if isinstance(mat_or_key, MatF):
        return HeckeVector.basis(double_coset_key(mat_or_key, level), spec)
    return HeckeVector.basis(mat_or_key, spec)


def _cells_of(v):
    return {key[0].lam: c for key, c in v.terms}


def test_gl1_abelian_case():
    pi = basis(MatF.diag_pi(S2, (1,), 16), S2, level=1)
    pi2 = basis(MatF.diag_pi(S2, (2,), 16), S2, level=1)
    assert convolve(pi, pi) == pi2


def _left_coset_oracle(lam1, lam2, p):
    """Coefficients of 1_{K pi^lam1 K} * 1_{K pi^lam2 K} at level 0 from left cosets only."""
    spec = RingSpec(p, INF)
    A = left_coset_reps(lam1, 0, spec)
    B = left_coset_reps(lam2, 0, spec)
    counts = Counter(cartan(matmul(a, b)).lam for a in A for b in B)
    total = len(A) * len(B)
    return {lam: Fraction(c, total) for lam, c in counts.items()}


@pytest.mark.parametrize("p", [2, 3])
def test_level_zero_square_of_the_standard_operator(p):
    spec = RingSpec(p, INF)
    T = basis(DoubleCosetKey((0, 1), 0), spec)
    got = _cells_of(convolve(T, T))
    assert got == _left_coset_oracle((0, 1), (0, 1), p)
    assert set(got) == {(0, 2), (1, 1)}
    if p == 2:
        assert got == {(0, 2): Fraction(2, 3), (1, 1): Fraction(1, 3)}


def test_level_zero_products_match_oracle():
    spec = RingSpec(3, INF)
    for l1, l2 in [((0, 1), (-1, 1)), ((0, 2), (0, 1)), ((-1, 0), (0, 1))]:
        got = _cells_of(convolve(basis(DoubleCosetKey(l1, 0), spec), basis(DoubleCosetKey(l2, 0), spec)))
        assert got == _left_coset_oracle(l1, l2, 3)


def test_identity_element():
    for level in (0, 1):
        I = HeckeVector.identity(2, level, S24)
        for key in hecke_window_basis(2, [(0, 1), (-1, 1)], level, S24)[:6]:
            f = HeckeVector.basis(key, S24)
            assert convolve(I, f) == f and convolve(f, I) == f


def test_associativity_and_mass():
    rng = random.Random(1)
    for spec, level in [(RingSpec(2, 1), 1), (RingSpec(3, INF), 0), (RingSpec(3, 2), 1)]:
        keys = hecke_window_basis(2, [(0, 0), (0, 1), (-1, 1)], level, spec)
        for _ in range(6):
            f, g, h = (HeckeVector.basis(rng.choice(keys), spec) for _ in range(3))
            fg = convolve(f, g)
            assert fg.mass() == f.mass() * g.mass() == 1
            assert convolve(fg, h) == convolve(f, convolve(g, h))


def test_linear_combinations():
    keys = hecke_window_basis(2, [(0, 1)], 1, S24)
    f = HeckeVector.basis(keys[0], S24).scale(Fraction(1, 3)) + HeckeVector.basis(keys[1], S24)
    g = HeckeVector.basis(keys[2], S24).scale(-2)
    assert convolve(f, g).mass() == f.mass() * g.mass()
    assert (f - f).terms == ()


def test_product_group_keys():
    pair = PairDescriptor.parse("diag:1")
    basis_ = hecke_window_basis(pair.group_dims, [((0, 1), (1,))], 1, S2)
    assert len(basis_) == len(keys_of_cell((0, 1), 1, S2)) * len(keys_of_cell((1,), 1, S2))
    f = HeckeVector.basis(basis_[0], S2)
    assert convolve(f, f).mass() == 1


def test_module_identity_and_axiom():
    rng = random.Random(2)
    for pair_s, spec, level in [("sym:1,1", RingSpec(2, 1), 1), ("diag:1", RingSpec(3, INF), 1)]:
        pair = PairDescriptor.parse(pair_s)
        I = HeckeVector.identity(pair.group_dims, level, spec)
        zero = tuple((0,) * d for d in pair.group_dims)
        step = ((0,) * (pair.group_dims[0] - 1) + (1,),) + zero[1:]
        keys = hecke_window_basis(pair.group_dims, [zero, step], level, spec)
        pts = module_window_basis(pair, [pair.zero_delta()], level, spec)
        for _ in range(4):
            v = ModuleVector.basis(rng.choice(pts), spec)
            assert act(I, v) == v
            f, g = (HeckeVector.basis(rng.choice(keys), spec) for _ in range(2))
            lhs = act(convolve(f, g), v)
            assert lhs == act(f, act(g, v))
            assert lhs.mass() == 1


def test_mismatched_operands():
    f = HeckeVector.identity(2, 1, S2)
    g = HeckeVector.identity(2, 0, S2)
    with pytest.raises(SpecMismatch):
        convolve(f, g)
    v = ModuleVector.basis(points_of_cell(PairDescriptor.parse("diag:1"), (0, 0, 0), 1, S2)[0], S2)
    with pytest.raises(SpecMismatch):
        act(f, v)


def test_window_overflow():
    T = basis(DoubleCosetKey((0, 3), 0), S2)
    with pytest.raises(WindowOverflow):
        convolve(T, T, radius=4)


def test_json_round_trip():
    keys = hecke_window_basis(2, [(-1, 1)], 1, S24)
    f = HeckeVector.basis(keys[0], S24).scale(Fraction(2, 7)) + HeckeVector.basis(keys[3], S24)
    assert vector_from_json(f.to_json()) == f
    pair = PairDescriptor.parse("sym:1,1")
    v = ModuleVector.basis(points_of_cell(pair, (-1,), 1, S24)[2], S24).scale(3)
    assert vector_from_json(v.to_json()) == v


# transfer ---------------------------------------------------------------------------------

def test_transfer_keeps_cells_and_round_trips():
    keys = hecke_window_basis(2, [(0, 0), (0, 1), (-1, 1)], 1, S24)
    for key in keys[::4]:
        f = HeckeVector.basis(key, S24)
        F = transfer_hecke(f, S2, 4)
        assert [k.lam for k in next(iter(F.coeffs()))] == [key[0].lam]
        assert transfer_hecke(F, S24, 4) == f


def test_transfer_zero_vector():
    z = HeckeVector.make(1, S24, (2,), {})
    assert transfer_hecke(z, S2, 4).terms == ()


def test_transfer_module_round_trip():
    pair = PairDescriptor.parse("diag:1")
    for pt in points_of_cell(pair, (0, -1, 0), 1, S24)[:5]:
        v = ModuleVector.basis(pt, S24)
        w = transfer_module(v, S2, 4)
        assert [p.delta for p, _ in w.terms] == [(0, -1, 0)]
        assert transfer_module(w, S24, 4) == v


def test_transfer_error_paths():
    f = HeckeVector.basis(keys_of_cell((-1, 1), 1, S24)[0], S24)
    with pytest.raises(InsufficientCloseness):
        transfer_hecke(f, S2, 2)
    g = HeckeVector.basis(keys_of_cell((0, 0), 1, RingSpec(2, 1))[0], RingSpec(2, 1))
    with pytest.raises(NotNClose):
        transfer_hecke(g, S2, 2)


def test_gl1_window_transfer():
    rep = verify_algebra_transfer(S24, S2, 1, [(0,), (1,), (-1,)], dims=1)
    assert rep["failures"] == [] and rep["passed"] == rep["checked"] == 9


def test_explicit_n_below_requirement_is_rejected():
    with pytest.raises(InsufficientCloseness):
        verify_algebra_transfer(S24, S2, 1, [(-1, 1)], n=2)
