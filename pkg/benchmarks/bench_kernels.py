"""Compare the compiled and numpy return-map kernels.

Run with ``python3 benchmarks/bench_kernels.py [--n 100000] [--repeat 5]``.
"""
import argparse
import math
import timeit

import numpy as np

from plastopt import _kernels_py

try:
    from plastopt import _kernels
except ImportError:
    _kernels = None


def make_inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    T = rng.standard_normal((n, 2)) * 10.0 ** rng.uniform(-2, 1, (n, 1))
    a = rng.uniform(0.5, 2.5, n)
    d = rng.uniform(0.01, 1.0, n)
    return T, a, d


def bench(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    T, a, d = make_inputs(args.n)
    print(f"{'gamma':>8} {'python [s]':>12} {'cython [s]':>12} {'speedup':>8} {'max |dX|':>10}")
    for gamma in (10.0, 1e3, 1e6, math.inf):
        tp = bench(_kernels_py.return_map, (T, a, d, gamma), args.repeat)
        if _kernels is None:
            print(f"{gamma:>8.0e} {tp:>12.4f} {'n/a':>12}")
            continue
        tc = bench(_kernels.return_map, (T, a, d, gamma), args.repeat)
        Xp, _ = _kernels_py.return_map(T, a, d, gamma)
        Xc, _ = _kernels.return_map(T, a, d, gamma)
        print(f"{gamma:>8.0e} {tp:>12.4f} {tc:>12.4f} {tp / tc:>8.1f} {np.max(np.abs(Xp - Xc)):>10.2e}")


if __name__ == "__main__":
    main()
