#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the contraction cascade (energy + gradient + Hessian products) and full
MALA blocks across representative (p, N) sizes.  Run:

    python3 benchmarks/bench_backends.py [--steps 2048]
"""

import argparse
import time

import numpy as np

from pspin.backends import _numpy
from pspin.rng import make_rng

try:
    from pspin.backends import _numba
    BACKENDS = [("numba", _numba), ("numpy", _numpy)]
except ImportError:
    print("numba unavailable; timing the numpy fallback only")
    BACKENDS = [("numpy", _numpy)]


def _case(p, n, seed=0):
    rng = make_rng(seed)
    jf = rng.standard_normal(n ** p)
    x = rng.standard_normal(n)
    x *= np.sqrt(n) / np.linalg.norm(x)
    return jf, x


def time_fn(fn, *args, repeat=5, min_time=0.15):
    fn(*args)                      # warm-up (and numba compilation)
    best = np.inf
    for _ in range(repeat):
        k = 0
        t0 = time.perf_counter()
        while True:
            fn(*args)
            k += 1
            dt = time.perf_counter() - t0
            if dt > min_time:
                break
        best = min(best, dt / k)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=2048, help="MALA block length")
    args = ap.parse_args()

    print(f"{'kernel':<26}{'p':>3}{'N':>5}" + "".join(f"{name:>14}" for name, _ in BACKENDS)
          + f"{'speedup':>10}")
    rows = []
    for p, n in ((3, 16), (3, 32), (3, 64), (4, 16), (4, 24)):
        jf, x = _case(p, n)
        times = [time_fn(mod.grad_energy, jf, n, p, x) for _, mod in BACKENDS]
        rows.append(("grad_energy", p, n, times))

    rng = make_rng(1)
    for p, n in ((3, 16), (3, 32), (4, 16)):
        jf, x = _case(p, n)
        normals = rng.standard_normal((args.steps, n))
        logu = np.log(rng.random(args.steps))
        zeros = np.zeros(n)
        times = [time_fn(mod.mala_block, jf, n, p, 2.0, 0.05, x, normals, logu,
                         zeros, -1.0, 1.0, False, repeat=3)
                 for _, mod in BACKENDS]
        rows.append((f"mala_block[{args.steps}]", p, n, times))

    for name, p, n, times in rows:
        cells = "".join(f"{t * 1e3:>12.3f}ms" for t in times)
        speed = f"{times[-1] / times[0]:>9.1f}x" if len(times) == 2 else ""
        print(f"{name:<26}{p:>3}{n:>5}{cells}{speed}")


if __name__ == "__main__":
    main()
