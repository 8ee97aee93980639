#!/usr/bin/env python3
"""Timing comparison of the closed-scan backends.

Runs the numba kernel and the pure-numpy fallback on the same instances:
a worst-case one (constant e-values just below 1/alpha, which forces the
scan through nearly the full O(K^3) table) and a typical random one.
Both backends make identical decisions; this only measures speed.

Usage: python benchmarks/bench_scan.py [--sizes 200,500,1000] [--repeats 3]
"""

import argparse
import time

import numpy as np

from closurefdr import kernels
from closurefdr.merging import ascending_prefix

ALPHA = 0.1


def _instances(K, rng):
    return {
        "worst": np.full(K, 0.999 / ALPHA),
        "typical": rng.exponential(1.0, K) * 20.0,
    }


def _time(fn, *args, repeats=3):
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="200,500,1000")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")
    kernels.warm_up()

    rng = np.random.default_rng(0)
    print(f"{'K':>6} {'case':<8} {'numba (s)':>12} {'numpy (s)':>12} {'speedup':>9}")
    for K in sizes:
        for case, values in _instances(K, rng).items():
            asc, prefix = ascending_prefix(values)
            t_nb = _time(kernels._scan_numba, asc, prefix, ALPHA, 0,
                         kernels.METRIC_FDP, 0.0, repeats=args.repeats)
            t_np = _time(kernels._scan_numpy, asc, prefix, ALPHA, 0,
                         kernels.METRIC_FDP, 0.0, repeats=args.repeats)
            got_nb = kernels._scan_numba(asc, prefix, ALPHA, 0, kernels.METRIC_FDP, 0.0)
            got_np = kernels._scan_numpy(asc, prefix, ALPHA, 0, kernels.METRIC_FDP, 0.0)
            assert got_nb == got_np, "backend decisions diverged"
            print(f"{K:>6} {case:<8} {t_nb:>12.4f} {t_np:>12.4f} {t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
