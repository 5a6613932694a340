"""Pure-NumPy implementations of the hot kernels.

Used automatically when the compiled extension is unavailable; the compiled
module mirrors this API exactly.  Results of the two backends agree to
floating-point roundoff (see tests/test_kernels.py).
"""

from __future__ import annotations

import numpy as np

BACKEND = "numpy"


def accumulate_impulses(bins: np.ndarray, values: np.ndarray, n_bins: int) -> np.ndarray:
    """Sum word vectors into their onset bins.

    bins: (n_words,) int64, values: (n_words, d).  Repeated bins accumulate.
    """
    out = np.zeros((n_bins, values.shape[1]), dtype=np.float64)
    np.add.at(out, bins, values)
    return out


def causal_convolve_columns(columns: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Causal convolution of each column with ``kernel``, same output length.

    out[t, j] = sum_k kernel[k] * columns[t - k, j]
    """
    n = columns.shape[0]
    out = np.empty_like(columns, dtype=np.float64)
    for j in range(columns.shape[1]):
        out[:, j] = np.convolve(columns[:, j], kernel)[:n]
    return out


def pearson_columns(y: np.ndarray, yhat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column-wise Pearson r between two equal-shape (n, v) matrices.

    Returns (r, defined); columns where either input has zero variance get
    r = 0 and defined = False.
    """
    yc = y - y.mean(axis=0)
    pc = yhat - yhat.mean(axis=0)
    sy = np.sqrt((yc * yc).sum(axis=0))
    sp = np.sqrt((pc * pc).sum(axis=0))
    # exactly-constant columns have zero variance by definition even when
    # the mean subtraction leaves an eps-sized residue
    varying_y = (y != y[0]).any(axis=0)
    varying_p = (yhat != yhat[0]).any(axis=0)
    defined = (sy > 0) & (sp > 0) & varying_y & varying_p
    denom = np.where(defined, sy * sp, 1.0)
    r = (yc * pc).sum(axis=0) / denom
    r = np.where(defined, np.clip(r, -1.0, 1.0), 0.0)
    return r, defined
