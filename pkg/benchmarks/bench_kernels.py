"""Compare the numba and numpy backends of the finite-ring matrix kernels.

    python3 benchmarks/bench_kernels.py [--batch 20000] [--repeat 5]

Both backends run on identical batches; the script checks they agree and
prints the best-of-N wall time per call.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from closefield import _kernels as K
from closefield.finite_ring import finite_ring
from closefield.local_ring import INF, RingSpec


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def run(batch: int, repeat: int, seed: int):
    rng = np.random.default_rng(seed)
    rows = []
    for spec, m, n in [(RingSpec(2, 1), 3, 2), (RingSpec(3, INF), 2, 3), (RingSpec(2, 4), 4, 3)]:
        R = finite_ring(spec, m)
        A = rng.integers(0, R.q, size=(batch, n, n))
        B = rng.integers(0, R.q, size=(batch, n, n))
        ref = K.matmul_numpy(A, B, R.add_t, R.mul_t)
        t_np = _best(lambda: K.matmul_numpy(A, B, R.add_t, R.mul_t), repeat)
        if K.HAVE_NUMBA:
            K.matmul_numba(A[:2], B[:2], R.add_t, R.mul_t)  # compile outside the timing
            same = bool(np.array_equal(ref, K.matmul_numba(A, B, R.add_t, R.mul_t)))
            t_nb = _best(lambda: K.matmul_numba(A, B, R.add_t, R.mul_t), repeat)
        else:
            same, t_nb = None, float("nan")
        rows.append((f"{spec} mod pi^{m}, {n}x{n}", t_np, t_nb, same))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(f"backend in use: {K.backend()}, batch {args.batch}")
    print(f"{'case':<26}{'numpy s':>12}{'numba s':>12}{'speedup':>10}  agree")
    for name, t_np, t_nb, same in run(args.batch, args.repeat, args.seed):
        print(f"{name:<26}{t_np:>12.5f}{t_nb:>12.5f}{t_np / t_nb:>10.1f}  {same}")


if __name__ == "__main__":
    main()
