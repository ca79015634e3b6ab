"""Benchmark the pulse-coincidence kernel: compiled vs pure numpy.

Usage:
    python benchmarks/bench_update.py [--trials 200] [--sizes 64x64,256x256]

The kernel applies per-slot coincidence steps to the weight matrix; it is
the hot path of training, so the compiled variant matters for anything
beyond toy sizes. Both variants consume identical inputs; the correctness
tests assert their outputs are bit-identical.
"""

import argparse
import time

import numpy as np

from xbarsim.backend import HAS_NUMBA
from xbarsim.kernels import apply_coincidences_numpy

if HAS_NUMBA:
    from xbarsim.kernels import apply_coincidences_numba


def make_inputs(d_out, d_in, rng):
    bl = 31
    x_fires = rng.random((bl, d_in)) < 0.4
    d_fires = rng.random((bl, d_out)) < 0.4
    n_coinc = int(x_fires.sum(axis=1) @ d_fires.sum(axis=1))
    steps = rng.normal(0.001, 0.0003, n_coinc)
    sign_x = rng.choice([-1.0, 1.0], d_in)
    sign_d = rng.choice([-1.0, 1.0], d_out)
    weights = rng.uniform(-0.5, 0.5, (d_out, d_in))
    return weights, (x_fires, d_fires, sign_x, sign_d, steps)


def bench(fn, weights, args, trials):
    times = np.empty(trials)
    for t in range(trials):
        w = weights.copy()
        t0 = time.perf_counter()
        fn(w, *args, 0.6)
        times[t] = time.perf_counter() - t0
    return times.mean() * 1e3, times.std() * 1e3


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=200)
    parser.add_argument("--sizes", default="64x64,256x256,784x300")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    sizes = [tuple(int(v) for v in s.split("x")) for s in args.sizes.split(",")]

    print(f"compiled kernel available: {HAS_NUMBA}")
    header = f"{'tile':>10}  {'numpy ms':>16}"
    if HAS_NUMBA:
        header += f"  {'compiled ms':>16}  {'speedup':>8}"
    print(header)
    for d_out, d_in in sizes:
        weights, kernel_args = make_inputs(d_out, d_in, rng)
        if HAS_NUMBA:  # compile outside the timed region
            apply_coincidences_numba(weights.copy(), *kernel_args, 0.6)
        np_mean, np_std = bench(apply_coincidences_numpy, weights,
                                kernel_args, args.trials)
        line = f"{d_out}x{d_in:<5}  {np_mean:10.3f} ± {np_std:.3f}"
        if HAS_NUMBA:
            nb_mean, nb_std = bench(apply_coincidences_numba, weights,
                                    kernel_args, args.trials)
            line += f"  {nb_mean:10.3f} ± {nb_std:.3f}  {np_mean / nb_mean:7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
