import random

import numpy as np
import pytest

from closefield.dvr_linalg import MatF
from closefield.local_ring import INF, PadicDigits, RingSpec

ACCEPTANCE_LINES = []


def rand_element(rng, spec, prec, integral=True):
    n = rng.randrange(0, prec + 1)
    digs = [rng.randrange(spec.p) for _ in range(n)]
    shift = 0 if integral else rng.randrange(-2, 3)
    return PadicDigits(spec, digs, shift, prec + max(shift, 0))


def rand_unit(rng, spec, prec):
    digs = [rng.randrange(1, spec.p)] + [rng.randrange(spec.p) for _ in range(prec - 1)]
    return PadicDigits(spec, digs, 0, prec)


def rand_gl(rng, spec, n, prec, level=0, spread=2):
    """Random element of K_level, times a random diagonal pi-power matrix when spread > 0."""
    while True:
        ints = np.array([[rng.randrange(-30, 31) for _ in range(n)] for _ in range(n)])
        E = MatF.from_ints(spec, ints, prec)
        M = MatF.identity(spec, n, prec) + E.shifted(level) if level else E
        if level or _unit_det(M):
            break
    if spread:
        lam = [rng.randrange(-spread, spread + 1) for _ in range(n)]
        D = MatF.diag_pi(spec, lam, prec + spread)
        M2 = MatF.from_ints(spec, np.array([[rng.randrange(-30, 31) for _ in range(n)] for _ in range(n)]), prec)
        if _unit_det(M2):
            from closefield.dvr_linalg import matmul

            return matmul(matmul(M, D), M2)
    return M


def _unit_det(M):
    from closefield.dvr_linalg import val_det

    try:
        return val_det(M) == 0
    except Exception:
        return False


@pytest.fixture
def rng():
    return random.Random(12345)


SPECS = [RingSpec(2, 1), RingSpec(2, 3), RingSpec(3, 2), RingSpec(3, INF), RingSpec(2, INF)]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
