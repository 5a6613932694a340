#!/usr/bin/env python3
"""Time the compiled kernels against the NumPy fallback on pipeline-sized inputs.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from encscale.kernels import _numpy

try:
    from encscale.kernels import _speed
except ImportError:
    _speed = None


def _best_of(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _cases(rng):
    # sizes mirror one run of the default pipeline: 300 scans at 16x
    # oversampling, a 256-tap response kernel, 200-voxel score maps
    n_bins, n_taps = 4800, 256
    bins = np.sort(rng.integers(0, n_bins, size=1200)).astype(np.int64)
    values = rng.standard_normal((1200, 256))
    columns = rng.standard_normal((n_bins, 256))
    kernel = rng.standard_normal(n_taps)
    y = rng.standard_normal((300, 200))
    yhat = y + rng.standard_normal((300, 200))
    wide = rng.standard_normal((300, 10000))
    wide_hat = wide + rng.standard_normal((300, 10000))
    return [
        ("accumulate_impulses 1200x256 -> 4800", "accumulate_impulses",
         (bins, values, n_bins)),
        ("causal_convolve 4800x256 * 256 taps", "causal_convolve_columns",
         (columns, kernel)),
        ("pearson 300x200", "pearson_columns", (y, yhat)),
        ("pearson 300x10000", "pearson_columns", (wide, wide_hat)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=7, help="best-of-N timing")
    opts = ap.parse_args()

    rng = np.random.default_rng(0)
    print(f"{'case':<40} {'numpy':>10} {'compiled':>10} {'speedup':>8}")
    for label, name, args in _cases(rng):
        base = _best_of(getattr(_numpy, name), args, opts.repeats)
        if _speed is None:
            print(f"{label:<40} {base * 1e3:>8.2f}ms {'n/a':>10} {'n/a':>8}")
            continue
        fast = _best_of(getattr(_speed, name), args, opts.repeats)
        a = getattr(_numpy, name)(*args)
        b = getattr(_speed, name)(*args)
        if name == "pearson_columns":
            np.testing.assert_allclose(a[0], b[0], atol=1e-10)
            assert (a[1] == b[1]).all()
        else:
            np.testing.assert_allclose(a, b, atol=1e-12)
        print(f"{label:<40} {base * 1e3:>8.2f}ms {fast * 1e3:>8.2f}ms {base / fast:>7.1f}x")
    if _speed is None:
        print("\ncompiled extension not built for this interpreter; only the "
              "fallback was timed")


if __name__ == "__main__":
    main()
