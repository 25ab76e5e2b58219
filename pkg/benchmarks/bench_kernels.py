"""Benchmark the compiled kernels against their pure-numpy twins.

Runs each hot kernel on representative workloads under both backends and
prints a timing table.  The numba path is selected by default; the numpy
fallback is what you get with AMVLAB_NUMBA=0.  Because the twins perform
identical operations, the outputs are also compared bitwise here.

Usage:  python benchmarks/bench_kernels.py [--threads N]
"""

import argparse
import time

import numpy as np

from amvlab import _kernels as k


def timeit(fn, *args, repeat=3):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    if not k.NUMBA_ENABLED:
        print("numba backend is disabled (AMVLAB_NUMBA=0 or numba missing); nothing to compare")
        return 1

    rng = np.random.default_rng(0)
    n = 3000
    z1 = rng.uniform(-2, 2, size=(400_000, 2))
    z2 = rng.uniform(-2, 2, size=(400_000, 1))
    pts = rng.uniform(-2, 2, size=(n, 3))
    x1, x2 = pts[:, :2], pts[:, 2:]
    rho = rng.uniform(0, 2, size=n)
    phi = rng.uniform(0, 2.0, size=n)
    bracket = np.zeros((1, 2, 2))
    bracket[0, 0, 1], bracket[0, 1, 0] = 1.0, -1.0

    def run_pair(name, numba_fn, numpy_fn, out_shape, fn_args):
        # warm the JIT before timing
        warm = np.empty(out_shape)
        numba_fn(*fn_args, warm, 0, min(64, out_shape[0]))
        fast = np.empty(out_shape)
        ref = np.empty(out_shape)
        t_fast, _ = timeit(lambda: numba_fn(*fn_args, fast, 0, out_shape[0]))
        t_ref, _ = timeit(lambda: numpy_fn(*fn_args, ref, 0, out_shape[0]))
        same = np.array_equal(fast, ref)
        print(f"{name:24s} numba {t_fast * 1e3:9.2f} ms   numpy {t_ref * 1e3:9.2f} ms   "
              f"speedup {t_ref / t_fast:6.2f}x   bitwise={same}")
        return same

    print(f"backend: {k.backend_name()}, threads={args.threads}")
    ok = True
    ok &= run_pair("gauge_fourth (4e5 pts)", k._gauge_fourth_numba, k._gauge_fourth_numpy,
                   (z1.shape[0],), (z1, z2, 16.0))
    ok &= run_pair(f"euclid_dist ({n}^2)", k._euclid_dist_numba, k._euclid_dist_numpy,
                   (n, n), (pts, pts))
    ok &= run_pair(f"carnot_dist ({n}^2)", k._carnot_dist_numba, k._carnot_dist_numpy,
                   (n, n), (x1, x2, x1, x2, bracket, 1.0))
    ok &= run_pair(f"cone_dist ({n}^2)", k._cone_dist_numba, k._cone_dist_numpy,
                   (n, n), (rho, phi, rho, phi, 2.0))

    # threaded wrapper path
    t1, d1 = timeit(lambda: k.carnot_dist_matrix(x1, x2, x1, x2, bracket, 1.0, 1))
    tn, dn = timeit(lambda: k.carnot_dist_matrix(x1, x2, x1, x2, bracket, 1.0, args.threads))
    print(f"{'carnot_dist wrapper':24s} 1 thr {t1 * 1e3:9.2f} ms   {args.threads} thr "
          f"{tn * 1e3:9.2f} ms   bitwise={np.array_equal(d1, dn)}")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
