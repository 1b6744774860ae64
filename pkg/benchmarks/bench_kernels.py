"""Time the compiled and numpy subset scans on the same inputs.

    python3 benchmarks/bench_kernels.py [--d 30] [--sizes 1,2,3,4] [--repeat 3]
"""

import argparse
import itertools
import time

import numpy as np

from spaceiv.kernels import BACKENDS


def gram_matrices(n, d, m, seed=0):
    rng = np.random.default_rng(seed)
    I = rng.standard_normal((n, m))
    X = I @ rng.standard_normal((m, d)) + rng.standard_normal((n, d))
    Y = X[:, 0] + X[:, 1] + rng.standard_normal(n)
    W = np.column_stack([Y, X])
    Q, _ = np.linalg.qr(I)
    PW = Q @ (Q.T @ W)
    R = W - PW
    return PW.T @ PW, R.T @ R, W.T @ W


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=500)
    parser.add_argument("--d", type=int, default=30)
    parser.add_argument("--m", type=int, default=10)
    parser.add_argument("--sizes", default="1,2,3,4")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    gp, gm, g = gram_matrices(args.n, args.d, args.m)
    names = sorted(BACKENDS)
    print(f"backends: {', '.join(names)}; d={args.d}, m={args.m}")
    print(f"{'kernel':<6} {'s':>2} {'subsets':>8} " + " ".join(f"{b + ' [ms]':>14}" for b in names)
          + ("  speedup  max|diff|" if len(names) == 2 else ""))
    for s in (int(v) for v in args.sizes.split(",")):
        subsets = np.array(list(itertools.combinations(range(args.d), s)), dtype=np.intp)
        for kernel in ("liml", "tsls", "ls"):
            calls = {
                b: (lambda mod=BACKENDS[b]: getattr(mod, f"{kernel}_scan")(g, subsets))
                if kernel == "ls"
                else (lambda mod=BACKENDS[b]: getattr(mod, f"{kernel}_scan")(gp, gm, subsets))
                for b in names
            }
            timings = {b: best_time(calls[b], args.repeat) for b in names}
            line = f"{kernel:<6} {s:>2} {len(subsets):>8} " + " ".join(f"{1e3 * timings[b]:>14.2f}" for b in names)
            if len(names) == 2:
                a, b = (calls[x]()[0] for x in names)
                diff = np.nanmax(np.abs(a - b) / np.maximum(1.0, np.abs(a)))
                line += f"  {timings['python'] / timings['cython']:>7.1f}x  {diff:.1e}"
            print(line)


if __name__ == "__main__":
    main()
