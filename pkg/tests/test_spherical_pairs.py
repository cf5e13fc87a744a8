import itertools
import random

import numpy as np
import pytest

from closefield.coset_enum import gl_elements
from closefield.dvr_linalg import MatF, in_congruence, matmul
from closefield.errors import NotInCongruenceSubgroup, NotInNeighborhood, ParseError, PrecisionLoss
from closefield.local_ring import INF, RingSpec
from closefield.oracles import brute_stabilizer, same_orbit, symmetric_invariant
from closefield.spherical_pairs import (
    CanonicalPoint,
    Equation,
    PairDescriptor,
    b_factor,
    canon,
    canonical_point,
    check_equations,
    p_ell_factor,
    points_of_cell,
    satisfies_singular_value_constraints,
    stabilizer,
    validate_smoothness_shape,
)

from conftest import rand_gl

SYM = PairDescriptor.parse("sym:1,1")
SYM21 = PairDescriptor.parse("sym:2,1")
DIAG = PairDescriptor.parse("diag:1")
DIAG2 = PairDescriptor.parse("diag:2")


def test_descriptor_parse():
    assert str(PairDescriptor.parse("sym:3,2")) == "sym:3,2"
    assert DIAG.group_dims == (2, 1)
    assert SYM21.group_dims == (3,)
    for bad in ["sym:1,2", "foo:1", "diag", "diag:0"]:
        with pytest.raises(ParseError):
            PairDescriptor.parse(bad)


def test_diag_frozen_canonical_forms():
    S = RingSpec(2, INF)
    assert canon(DIAG, DIAG.x0(S))[0] == (0, 0, 0)
    assert canon(DIAG, MatF.diag_pi(S, (0, 1), 16))[0] == (0, 1, 1)
    X = MatF.from_ints(RingSpec(2, 1), np.array([[4, 1], [2, 8]]), 16)
    assert canon(DIAG, X)[0] == (1, 0, 0)


def test_sym_frozen_canonical_forms():
    S = RingSpec(3, 1)
    for mu in (0, -1, -2):
        assert canon(SYM, SYM.rep((mu,), S))[0] == (mu,)
    # any g in GL_2(O) is in the trivial cell
    assert canon(SYM, MatF.from_ints(S, np.array([[2, 1], [1, 1]]), 16))[0] == (0,)


def test_canon_reconstructs_point():
    rng = random.Random(2)
    S = RingSpec(3, 2)
    for pair in (DIAG, DIAG2):
        for _ in range(10):
            X = rand_gl(rng, S, pair.point_dim, 18, spread=1)
            delta, kappa = canon(pair, X)
            assert satisfies_singular_value_constraints(delta, pair.n)
            assert all(k.is_integral() and in_congruence(k, 0) for k in kappa)
            Y = pair.act(kappa, pair.rep(delta, S))
            assert Y.prec >= 10 and Y.agreement(X) >= Y.prec


def test_canon_lands_in_the_same_orbit():
    rng = random.Random(12)
    S = RingSpec(2, INF)
    for _ in range(10):
        X = rand_gl(rng, S, 2, 16, spread=1)
        delta, kappa = canon(DIAG, X)
        assert same_orbit(DIAG, X, DIAG.act(kappa, DIAG.rep(delta, S)), 0, budget=200_000)


def test_sym_outputs_in_cone_and_match_invariant():
    rng = random.Random(3)
    S = RingSpec(2, 3)
    for pair in (SYM, SYM21):
        for _ in range(10):
            g = rand_gl(rng, S, pair.point_dim, 18, spread=2)
            delta, _ = canon(pair, g)
            assert pair.in_cone(delta)
            assert symmetric_invariant(g, pair) == symmetric_invariant(pair.rep(delta, S), pair)


def test_canonical_point_invariant_under_congruence_action():
    rng = random.Random(4)
    S = RingSpec(2, 1)
    for pair in (SYM, DIAG):
        X = pair.act(tuple(rand_gl(rng, S, d, 16, spread=0) for d in pair.group_dims), pair.rep(pair.zero_delta(), S))
        base = canonical_point(pair, X, 1)
        for _ in range(5):
            u = tuple(rand_gl(rng, S, d, 16, level=1, spread=0) for d in pair.group_dims)
            assert canonical_point(pair, pair.act(u, X), 1) == base


def test_points_of_cell_is_the_orbit_set():
    S = RingSpec(2, INF)
    for pair, delta in [(DIAG, (0, 0, 0)), (SYM, (-1,))]:
        pts = points_of_cell(pair, delta, 1, S)
        X = pair.rep(delta, S)
        seen = set()
        for combo in itertools.product(*[gl_elements(d, S, 1) for d in pair.group_dims]):
            kappa = tuple(MatF.from_codes(S, c, 1, 24) for c in combo)
            seen.add(canonical_point(pair, pair.act(kappa, X), 1))
        assert seen == set(pts)


def test_stabilizer_matches_brute_force_small():
    S = RingSpec(3, INF)
    for pair, delta in [(DIAG, (0, 0, 0)), (SYM, (-1,))]:
        eq = stabilizer(pair, delta, 1, S)
        eq_set = {tuple(tuple(int(x) for x in a[i].ravel()) for a in eq) for i in range(len(eq[0]))}
        brute = {tuple(tuple(int(x) for x in k.ravel()) for k in t) for t in brute_stabilizer(pair, delta, 1, S)}
        assert eq_set == brute


def test_canonical_point_json_round_trip():
    S = RingSpec(3, INF)
    pt = points_of_cell(DIAG, (0, -1, 0), 1, S)[5]
    assert CanonicalPoint.from_json(pt.to_json(3), 3) == pt


def test_precision_loss_is_reported():
    S = RingSpec(2, INF)
    X = SYM.rep((-3,), S, prec=4)
    with pytest.raises(PrecisionLoss) as info:
        canonical_point(SYM, X, 1)
    assert info.value.required >= 6


# factorizations ---------------------------------------------------------------------------------

def test_p_ell_factor_identity():
    rng = random.Random(6)
    for S in (RingSpec(2, 1), RingSpec(3, INF)):
        for pair in (SYM, SYM21):
            for _ in range(5):
                g = rand_gl(rng, S, pair.point_dim, 14, level=2, spread=0)
                P, H = p_ell_factor(g, pair, 2)
                x0 = pair.x0(S, 14)
                assert matmul(g, x0).agreement(matmul(matmul(P, x0), H)) >= 10


def test_p_ell_factor_rejects_outside_congruence():
    S = RingSpec(2, 1)
    with pytest.raises(NotInCongruenceSubgroup):
        p_ell_factor(MatF.identity(S, 2, 8) + MatF.identity(S, 2, 8).shifted(1), SYM, 2)


def test_b_factor_identity():
    rng = random.Random(7)
    for S in (RingSpec(2, 1), RingSpec(3, INF)):
        for pair in (DIAG, DIAG2):
            x0 = pair.x0(S, 14)
            for _ in range(5):
                g = rand_gl(rng, S, pair.point_dim, 14, level=1, spread=0)
                y = matmul(g, x0)
                b1, b2 = b_factor(y, pair, 1)
                n = pair.n
                assert all(not b1[i, j].digits for i in range(n + 1) for j in range(i + 1, n + 1))
                assert all(not b2[i, j].digits for i in range(n) for j in range(i))
                assert in_congruence(b1, 1) and in_congruence(b2, 1)
                assert pair.act((b1, b2), x0).agreement(y) >= 10


def test_b_factor_rejects_far_points():
    S = RingSpec(2, INF)
    with pytest.raises(NotInNeighborhood):
        b_factor(MatF.diag_pi(S, (0, 1), 8), DIAG, 1)


# smoothness shape -------------------------------------------------------------------------------

def test_smoothness_validator_passes_at_x0():
    assert validate_smoothness_shape(SYM, (0,), (0,)).passed
    assert validate_smoothness_shape(DIAG, (0, 0, 0), (0, 0, 0)).passed


def test_smoothness_validator_adversarial_fixture():
    rep = check_equations([Equation([(1, 0, 0), (1, 0, 2)], None)])
    assert not rep.passed and len(rep.offending) == 1
    assert not check_equations([Equation([(1, 3, 0)], (-1, 1))]).passed
