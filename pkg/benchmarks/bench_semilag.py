"""Benchmark the bicubic interpolation kernels: compiled vs numpy.

Run as: python3 benchmarks/bench_semilag.py [grid_size ...]
"""

import sys
import time

import numpy as np

from oddflow.fields import Grid2D
from oddflow.semilag import USING_COMPILED, interp_bicubic


def bench(n, repeats=5):
    grid = Grid2D(n, n)
    rng = np.random.default_rng(7)
    vals = rng.standard_normal((n, n))
    x1 = rng.uniform(-10.0, 10.0, n * n)
    x2 = rng.uniform(-10.0, 10.0, n * n)
    results = {}
    for label, compiled in (("compiled", True), ("numpy", False)):
        if compiled and not USING_COMPILED:
            results[label] = None
            continue
        interp_bicubic(grid, vals, x1, x2, compiled=compiled)  # warm up
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            interp_bicubic(grid, vals, x1, x2, compiled=compiled)
            best = min(best, time.perf_counter() - t0)
        results[label] = best
    return results


def main():
    sizes = [int(a) for a in sys.argv[1:]] or [64, 128, 256, 512]
    print(f"compiled kernel available: {USING_COMPILED}")
    print(f"{'n':>6} {'points':>10} {'compiled':>12} {'numpy':>12} {'speedup':>9}")
    for n in sizes:
        r = bench(n)
        c, p = r["compiled"], r["numpy"]
        cs = f"{c * 1e3:9.3f} ms" if c is not None else "        n/a"
        ratio = f"{p / c:8.2f}x" if c else "      n/a"
        print(f"{n:>6} {n * n:>10} {cs:>12} {p * 1e3:9.3f} ms {ratio:>9}")


if __name__ == "__main__":
    main()
