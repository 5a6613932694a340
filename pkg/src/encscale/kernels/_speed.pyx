# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the hot kernels in ``_numpy``.

Plain C loops, single-threaded; task-level parallelism happens above.
Summation order matches the direct definition so results are reproducible.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


def accumulate_impulses(bins, values, Py_ssize_t n_bins):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] b = np.ascontiguousarray(bins, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n_words = b.shape[0]
    cdef Py_ssize_t d = v.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n_bins, d), dtype=np.float64)
    cdef Py_ssize_t w, j, row
    for w in range(n_words):
        row = b[w]
        for j in range(d):
            out[row, j] += v[w, j]
    return out


def causal_convolve_columns(columns, kernel):
    cdef double[:, ::1] x = np.ascontiguousarray(columns, dtype=np.float64)
    cdef double[::1] k = np.ascontiguousarray(kernel, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    cdef Py_ssize_t kn = k.shape[0]
    out_arr = np.zeros((n, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t t, j, tap, lim
    cdef double kv
    # accumulate kernel taps outermost so each tap adds a shifted copy of
    # the input; this matches np.convolve's direct sum to roundoff, and the
    # unit-stride j loop has no cross-iteration dependency so the compiler
    # may vectorize it without changing any result
    for tap in range(kn):
        kv = k[tap]
        if kv == 0.0:
            continue
        lim = n - tap
        for t in range(lim):
            for j in range(d):
                out[t + tap, j] += kv * x[t, j]
    return out_arr


def pearson_columns(y, yhat):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a = np.ascontiguousarray(y, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] b = np.ascontiguousarray(yhat, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t v = a.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] r = np.zeros(v, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] defined = np.zeros(v, dtype=np.uint8)
    cdef Py_ssize_t i, j
    cdef bint const_a, const_b
    cdef double ma, mb, da, db, saa, sbb, sab, val
    for j in range(v):
        ma = 0.0
        mb = 0.0
        const_a = True
        const_b = True
        for i in range(n):
            ma += a[i, j]
            mb += b[i, j]
            if a[i, j] != a[0, j]:
                const_a = False
            if b[i, j] != b[0, j]:
                const_b = False
        ma /= n
        mb /= n
        # a constant column has zero variance by definition; the mean
        # subtraction below can leave an eps-sized residue that would
        # otherwise masquerade as signal
        if const_a or const_b:
            continue
        saa = 0.0
        sbb = 0.0
        sab = 0.0
        for i in range(n):
            da = a[i, j] - ma
            db = b[i, j] - mb
            saa += da * da
            sbb += db * db
            sab += da * db
        if saa > 0.0 and sbb > 0.0:
            val = sab / ((saa ** 0.5) * (sbb ** 0.5))
            if val > 1.0:
                val = 1.0
            elif val < -1.0:
                val = -1.0
            r[j] = val
            defined[j] = 1
    return r, defined.view(np.bool_)
