"""Time the numba kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--n 10000] [--substeps 20] [--repeat 5]

Both backends are called directly (the env flag only sets the default), so
one process covers both.  The first numba call is timed separately as the
compile cost.
"""
import argparse
import math
import time

import numpy as np

from cogarch_ii import _kernels
from cogarch_ii._accel import HAVE_NUMBA
from cogarch_ii.levy import VarianceGamma


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10_000, help="observations per path")
    ap.add_argument("--substeps", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    eta, phi, dt = 0.053, 0.038, 1.0 / args.substeps
    steps = (args.n + 500) * args.substeps
    jumps, bm = VarianceGamma(1.0).sample_parts(np.random.default_rng(0), dt, steps)
    decay, level = math.exp(-eta * dt), 1.0 / eta
    path_args = (jumps, bm, decay, level, phi, 1 / 0.015, args.substeps, False)
    grad_args = (jumps, decay, level, -1 / eta**2, dt, phi, 1 / 0.015, 0.0, 0.0)

    print(f"inner steps: {steps:,}  numba available: {HAVE_NUMBA}")
    if HAVE_NUMBA:
        t0 = time.perf_counter()
        _kernels.path(*path_args, use_numba=True)
        _kernels.grad(*grad_args, use_numba=True)
        print(f"numba first call (compile + run): {time.perf_counter() - t0:.2f} s")

    rows = []
    for name, fn, a in (("path", _kernels.path, path_args), ("grad", _kernels.grad, grad_args)):
        t_np = best_of(lambda: fn(*a, use_numba=False), args.repeat)
        t_nb = best_of(lambda: fn(*a, use_numba=True), args.repeat) if HAVE_NUMBA else float("nan")
        ref, alt = fn(*a, use_numba=False), fn(*a, use_numba=True)
        err = max(float(np.max(np.abs(x - y)) / np.max(np.abs(x))) for x, y in zip(ref, alt) if x.size)
        rows.append((name, t_np, t_nb, err))

    print(f"{'kernel':<8}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}{'max rel diff':>15}")
    for name, t_np, t_nb, err in rows:
        print(f"{name:<8}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>10.1f}{err:>15.2e}")


if __name__ == "__main__":
    main()
