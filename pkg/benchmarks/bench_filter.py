"""Benchmark the compiled filter kernel against its pure-numpy twin.

Usage: python benchmarks/bench_filter.py [N] [p] [repeats]

Both backends run the same function body over the same simulated returns, so
the comparison isolates the compilation. The first compiled call includes
jit compilation and is reported separately.
"""

import sys
import time

import numpy as np

from msvol import _kernels, filtering, matstat, simulator


def time_backend(fn, ys, r0, k, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(ys, r0.copy(), k, 1e-13)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv):
    n = int(argv[1]) if len(argv) > 1 else 4774
    p = int(argv[2]) if len(argv) > 2 else 8
    repeats = int(argv[3]) if len(argv) > 3 else 5

    print(f"filter pass over N={n}, p={p} (best of {repeats})")
    cfg = simulator.SimConfig(p=p, delta=0.9, N=n, prior_scale=np.eye(p), seed=0)
    ys = simulator.simulate_path(cfg).returns
    model = filtering.new_config(p, 0.9, np.eye(p))
    r0 = matstat.chol_upper(model.prior_scale)

    t_numpy = time_backend(_kernels.filter_core_numpy, ys, r0, model.k, repeats)
    print(f"numpy backend:    {t_numpy * 1e3:9.1f} ms")

    if not _kernels.NUMBA_ENABLED:
        print("numba backend:    unavailable (MSVOL_DISABLE_NUMBA set or "
              "numba not installed)")
        return
    t0 = time.perf_counter()
    _kernels.filter_core(ys[:2], r0.copy(), model.k, 1e-13)
    print(f"numba first call: {(time.perf_counter() - t0) * 1e3:9.1f} ms "
          "(includes compilation)")
    t_numba = time_backend(_kernels.filter_core, ys, r0, model.k, repeats)
    print(f"numba backend:    {t_numba * 1e3:9.1f} ms  "
          f"({t_numpy / t_numba:.1f}x speedup)")


if __name__ == "__main__":
    main(sys.argv)
