import os
import subprocess
import sys

import numpy as np
import pytest

from closefield import _kernels as K
from closefield.finite_ring import FiniteRing, finite_ring
from closefield.local_ring import INF, PadicDigits, RingSpec, add, mul


@pytest.mark.parametrize("spec,m", [(RingSpec(2, 1), 3), (RingSpec(2, 2), 3), (RingSpec(3, INF), 2), (RingSpec(3, 2), 2)])
def test_tables_agree_with_digit_arithmetic(spec, m):
    R = finite_ring(spec, m)
    for a in range(R.q):
        x = R.element(a)
        for b in range(0, R.q, max(1, R.q // 7)):
            y = R.element(b)
            assert R.add_t[a, b] == add(x, y).code(m)
            assert R.mul_t[a, b] == mul(x, y).code(m)


def test_code_order_is_digit_order():
    R = finite_ring(RingSpec(3, INF), 2)
    assert R.one == 3
    assert R.pi_power(1) == 1
    assert list(R.units()) == list(range(3, 9))


def test_unit_inverses():
    for spec in [RingSpec(2, 3), RingSpec(3, 1), RingSpec(5, INF)]:
        R = finite_ring(spec, 3)
        u = R.units()
        assert np.all(R.mul_t[u, R.inv_t[u]] == R.one)
        assert np.all(R.inv_t[: R.unit_floor] == -1)


def test_equal_and_mixed_characteristic_differ_beyond_e():
    # O/pi^2 for e=1 is Z/4; for e=INF it is F_2[t]/t^2
    A = finite_ring(RingSpec(2, 1), 2)
    B = finite_ring(RingSpec(2, INF), 2)
    one = A.one
    assert A.add_t[one, one] != 0
    assert B.add_t[one, one] == 0
    # and they agree modulo pi^1
    assert np.array_equal(finite_ring(RingSpec(2, 1), 1).mul_t, finite_ring(RingSpec(2, INF), 1).mul_t)


def test_table_limit():
    with pytest.raises(ValueError):
        FiniteRing(RingSpec(2, INF), 12)


def test_mat_inv_and_det():
    R = finite_ring(RingSpec(3, 2), 2)
    rng = np.random.default_rng(1)
    done = 0
    while done < 30:
        M = rng.integers(0, R.q, size=(3, 3))
        if R.det(M[None])[0] < R.unit_floor:
            continue
        Mi = R.mat_inv(M)
        assert np.array_equal(R.matmul(M[None], Mi[None])[0], R.identity(3))
        done += 1


@pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba unavailable")
def test_backends_agree():
    R = finite_ring(RingSpec(2, 4), 3)
    rng = np.random.default_rng(2)
    A = rng.integers(0, R.q, size=(200, 3, 3))
    B = rng.integers(0, R.q, size=(200, 3, 3))
    assert np.array_equal(K.matmul_numpy(A, B, R.add_t, R.mul_t), K.matmul_numba(A, B, R.add_t, R.mul_t))


def test_keys_round_trip():
    R = finite_ring(RingSpec(2, INF), 2)
    rng = np.random.default_rng(3)
    M = rng.integers(0, R.q, size=(50, 2, 2))
    assert np.array_equal(R.from_keys(R.keys(M), 2), M)


def test_environment_flag_selects_numpy():
    env = dict(os.environ, CLOSEFIELD_DISABLE_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "from closefield import _kernels as K; print(K.backend())"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "numpy"
