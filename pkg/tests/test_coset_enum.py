import random

import numpy as np
import pytest

from closefield.coset_enum import (
    DoubleCosetKey,
    bi_orbit_of,
    coset_index,
    double_coset_key,
    gl_elements,
    keys_of_cell,
    left_coset_reps,
    right_coset_reps,
    right_reps_of_key,
)
from closefield.dvr_linalg import MatF, in_congruence, matinv, matmul
from closefield.errors import BudgetExceeded
from closefield.finite_ring import finite_ring
from closefield.local_ring import INF, RingSpec

from conftest import rand_gl


def test_group_orders():
    assert len(gl_elements(2, RingSpec(2, 1), 2)) == 96
    assert len(gl_elements(2, RingSpec(2, INF), 2)) == 96
    assert len(gl_elements(1, RingSpec(3, 1), 1)) == 2
    assert len(gl_elements(3, RingSpec(2, INF), 1)) == 168


def test_gl_elements_are_invertible():
    spec = RingSpec(3, 2)
    R = finite_ring(spec, 1)
    G = gl_elements(2, spec, 1)
    assert np.all(R.det(G) >= R.unit_floor)


def test_budget_is_enforced():
    with pytest.raises(BudgetExceeded):
        gl_elements(3, RingSpec(3, INF), 2, budget=1000)


@pytest.mark.parametrize("p", [2, 3])
def test_hecke_degree_level_zero(p):
    assert len(left_coset_reps((0, 1), 0, RingSpec(p, INF))) == p + 1


@pytest.mark.parametrize("lam,level,expected", [((0, 1), 1, 2), ((-1, 1), 1, 4), ((0, 0, 1), 1, 4), ((0, 2), 2, 4)])
def test_degree_positive_level(lam, level, expected):
    spec = RingSpec(2, 3)
    assert len(left_coset_reps(lam, level, spec)) == expected == coset_index(lam, level, 2)


def _same_right_coset(a, b, level):
    return in_congruence(matmul(a, matinv(b)), level)


@pytest.mark.parametrize("spec", [RingSpec(2, 1), RingSpec(3, INF)])
def test_right_reps_are_distinct_cosets_in_the_cell(spec):
    for lam, level in [((0, 1), 0), ((0, 1), 1), ((-1, 1), 1)]:
        reps = right_coset_reps(lam, level, spec)
        for h in reps:
            assert double_coset_key(h, level).lam == lam
        for i in range(len(reps)):
            for j in range(i):
                assert not _same_right_coset(reps[i], reps[j], level)


def test_frozen_key_counts():
    # counted independently by brute-force bi-orbits below
    assert [len(keys_of_cell(l, 1, RingSpec(2, 4))) for l in [(0, 0), (0, 1), (-1, 1)]] == [6, 9, 9]
    assert [len(keys_of_cell(l, 1, RingSpec(3, 4))) for l in [(0, 0), (0, 1), (-1, 1)]] == [48, 64, 64]


@pytest.mark.parametrize("spec", [RingSpec(2, 1), RingSpec(3, INF)])
def test_keys_partition_matches_bi_orbits(spec):
    for lam in [(0, 0), (0, 1)]:
        keys = keys_of_cell(lam, 1, spec)
        orbits = set()
        for key in keys:
            orb, _ = bi_orbit_of(key.representative(spec), 1)
            orbits.add(tuple(orb.tolist()))
        assert len(orbits) == len(keys)


def test_key_is_bi_invariant():
    rng = random.Random(11)
    spec = RingSpec(2, 3)
    for _ in range(25):
        g = rand_gl(rng, spec, 2, 16, spread=1)
        a = rand_gl(rng, spec, 2, 16, level=1, spread=0)
        b = rand_gl(rng, spec, 2, 16, level=1, spread=0)
        assert double_coset_key(matmul(matmul(a, g), b), 1) == double_coset_key(g, 1)


def test_right_reps_of_key_cover_the_double_coset():
    spec = RingSpec(3, INF)
    for key in keys_of_cell((0, 1), 1, spec)[:8]:
        reps = right_reps_of_key(key, spec)
        assert len(reps) == 3
        assert all(double_coset_key(h, 1) == key for h in reps)


def test_key_json_round_trip():
    key = keys_of_cell((-1, 1), 1, RingSpec(2, INF))[3]
    assert DoubleCosetKey.from_json(key.to_json()) == key
    assert key.modulus == 3 and key.window_floor == 1
