"""Compiled backend vs NumPy fallback: identical API, roundoff-level agreement."""

import numpy as np
import pytest

from encscale import kernels
from encscale.kernels import _numpy

try:
    from encscale.kernels import _speed
except ImportError:
    _speed = None

needs_compiled = pytest.mark.skipif(_speed is None, reason="compiled extension not built")


def test_active_backend_reported():
    assert kernels.BACKEND in ("compiled", "numpy")
    if _speed is not None:
        assert kernels.BACKEND == "compiled"


def test_accumulate_impulses_basic():
    bins = np.array([0, 2, 2, 4], dtype=np.int64)
    values = np.array([[1.0, 10.0], [2.0, 20.0], [3.0, 30.0], [4.0, 40.0]])
    out = kernels.accumulate_impulses(bins, values, 5)
    expected = np.array([[1.0, 10.0], [0.0, 0.0], [5.0, 50.0], [0.0, 0.0], [4.0, 40.0]])
    np.testing.assert_array_equal(out, expected)


def test_causal_convolve_matches_definition():
    rng = np.random.default_rng(3)
    cols = rng.standard_normal((30, 2))
    kernel = rng.standard_normal(7)
    out = kernels.causal_convolve_columns(cols, kernel)
    # direct evaluation of out[t, j] = sum_k kernel[k] * cols[t-k, j]
    for t in range(30):
        for j in range(2):
            ref = sum(kernel[k] * cols[t - k, j] for k in range(min(t + 1, 7)))
            assert abs(out[t, j] - ref) < 1e-12


def test_pearson_columns_known_values():
    y = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 1.0], [4.0, 2.0]])
    yhat = np.array([[2.0, 5.0], [4.0, 5.0], [6.0, 5.0], [8.0, 5.0]])
    r, defined = kernels.pearson_columns(y, yhat)
    assert r[0] == pytest.approx(1.0, abs=1e-15)
    # second prediction column is constant: undefined, reported as 0
    assert r[1] == 0.0
    np.testing.assert_array_equal(defined, [True, False])


def test_pearson_columns_clipped_to_unit_interval():
    rng = np.random.default_rng(11)
    y = rng.standard_normal((50, 20))
    r, _ = kernels.pearson_columns(y, y * 3.0 + 1.0)
    assert np.all(r <= 1.0)
    assert np.all(r >= 1.0 - 1e-12)


@needs_compiled
def test_backend_parity_accumulate():
    rng = np.random.default_rng(42)
    for _ in range(10):
        n_words = int(rng.integers(1, 200))
        d = int(rng.integers(1, 30))
        n_bins = int(rng.integers(1, 50))
        bins = rng.integers(0, n_bins, size=n_words).astype(np.int64)
        values = rng.standard_normal((n_words, d))
        a = _speed.accumulate_impulses(bins, values, n_bins)
        b = _numpy.accumulate_impulses(bins, values, n_bins)
        np.testing.assert_allclose(a, b, atol=1e-12, rtol=0)


@needs_compiled
def test_backend_parity_convolve():
    rng = np.random.default_rng(43)
    for _ in range(10):
        n = int(rng.integers(2, 300))
        v = int(rng.integers(1, 20))
        klen = int(rng.integers(1, 80))
        cols = rng.standard_normal((n, v))
        kernel = rng.standard_normal(klen)
        a = _speed.causal_convolve_columns(cols, kernel)
        b = _numpy.causal_convolve_columns(cols, kernel)
        np.testing.assert_allclose(a, b, atol=1e-10, rtol=1e-12)


@needs_compiled
def test_backend_parity_pearson():
    rng = np.random.default_rng(44)
    for _ in range(10):
        n = int(rng.integers(3, 200))
        v = int(rng.integers(1, 40))
        y = rng.standard_normal((n, v))
        yhat = rng.standard_normal((n, v))
        yhat[:, 0] = 0.0  # force one undefined column
        ra, da = _speed.pearson_columns(y, yhat)
        rb, db = _numpy.pearson_columns(y, yhat)
        np.testing.assert_allclose(ra, rb, atol=1e-13, rtol=0)
        np.testing.assert_array_equal(da, db)


@needs_compiled
def test_backend_parity_noncontiguous_inputs():
    rng = np.random.default_rng(45)
    wide = rng.standard_normal((40, 20))
    cols = wide[:, ::2]  # strided view
    kernel = rng.standard_normal(9)
    a = _speed.causal_convolve_columns(np.ascontiguousarray(cols), kernel)
    b = _numpy.causal_convolve_columns(cols, kernel)
    np.testing.assert_allclose(a, b, atol=1e-12)
