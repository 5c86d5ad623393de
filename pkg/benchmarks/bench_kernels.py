"""Compare the compiled and pure-numpy kernel paths.

    python benchmarks/bench_kernels.py [--repeat N] [--size HxW]

Each kernel is warmed up once (JIT compilation excluded), then timed as the
best of N runs. The outputs of the two paths are also compared bitwise.
"""

import argparse
import time

import numpy as np

from splitseg import kernels
from splitseg.field import FIVE_POINT, gaussian_kernel
from splitseg.splitting import GAMMA


def best_of(fn, repeat):
    fn()
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", default="192x256")
    args = ap.parse_args()
    h, w = (int(x) for x in args.size.split("x"))
    rng = np.random.Generator(np.random.PCG64(0))
    u = rng.random((h, w))
    ubar = rng.uniform(-2.0, 3.0, (h, w))
    g = gaussian_kernel(2.0)
    col, row = g.factors
    cases = {
        "laplacian 5-point": lambda: kernels.conv_direct(u, FIVE_POINT.weights),
        "gaussian 17x17 direct": lambda: kernels.conv_direct(u, g.weights),
        "gaussian separable": lambda: kernels.conv_separable(u, col, row),
        "double-well c=6": lambda: kernels.dw_solve(ubar, 6.0),
        "logit mu=1": lambda: kernels.logit_solve(ubar, 1.0, GAMMA),
        "sequential sum": lambda: kernels.seq_sum(u.ravel()),
    }
    print(f"field {h}x{w}, best of {args.repeat}")
    print(f"{'kernel':<24}{'numba ms':>10}{'numpy ms':>10}{'speedup':>9}  bitwise")
    for name, fn in cases.items():
        times, outs = {}, {}
        for backend in ("numba", "numpy"):
            with kernels.use_backend(backend):
                times[backend] = best_of(fn, args.repeat)
                outs[backend] = fn()
        same = np.array_equal(outs["numba"], outs["numpy"])
        print(f"{name:<24}{1e3 * times['numba']:>10.2f}{1e3 * times['numpy']:>10.2f}"
              f"{times['numpy'] / times['numba']:>9.1f}  {'yes' if same else 'NO'}")


if __name__ == "__main__":
    main()
