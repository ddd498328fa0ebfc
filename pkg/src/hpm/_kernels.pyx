# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: DTW accumulation and frame autocorrelation."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def dtw_accumulate(const double[:, ::1] cost):
    """Accumulated-cost matrix with steps (1,0), (0,1), (1,1)."""
    cdef Py_ssize_t n = cost.shape[0]
    cdef Py_ssize_t m = cost.shape[1]
    cdef Py_ssize_t i, j
    cdef double best, up, left, diag
    acc_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] acc = acc_arr
    acc[0, 0] = cost[0, 0]
    for j in range(1, m):
        acc[0, j] = acc[0, j - 1] + cost[0, j]
    for i in range(1, n):
        acc[i, 0] = acc[i - 1, 0] + cost[i, 0]
        for j in range(1, m):
            diag = acc[i - 1, j - 1]
            up = acc[i - 1, j]
            left = acc[i, j - 1]
            best = diag
            if up < best:
                best = up
            if left < best:
                best = left
            acc[i, j] = best + cost[i, j]
    return acc_arr


def dtw_backtrack(const double[:, ::1] acc):
    """Optimal path from (0, 0) to (n-1, m-1); ties prefer diagonal, then up."""
    cdef Py_ssize_t i = acc.shape[0] - 1
    cdef Py_ssize_t j = acc.shape[1] - 1
    cdef double diag, up, left
    path = [(i, j)]
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag = acc[i - 1, j - 1]
            up = acc[i - 1, j]
            left = acc[i, j - 1]
            if diag <= up and diag <= left:
                i -= 1
                j -= 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        path.append((i, j))
    path.reverse()
    return np.asarray(path, dtype=np.int64)


def frame_autocorr(const double[:, ::1] frames, Py_ssize_t min_lag, Py_ssize_t max_lag):
    """Biased autocorrelation of every frame for lags 0 and min_lag..max_lag."""
    cdef Py_ssize_t n_frames = frames.shape[0]
    cdef Py_ssize_t width = frames.shape[1]
    cdef Py_ssize_t n_lags = max_lag - min_lag + 1
    cdef Py_ssize_t f, k, t
    cdef double s
    out_arr = np.zeros((n_frames, n_lags), dtype=np.float64)
    energy_arr = np.zeros(n_frames, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] energy = energy_arr
    cdef Py_ssize_t stop
    cdef double x
    for f in range(n_frames):
        s = 0.0
        for t in range(width):
            s += frames[f, t] * frames[f, t]
        energy[f] = s
        # lag loop innermost: an axpy over lags with no reduction chain
        for t in range(width - min_lag):
            x = frames[f, t]
            stop = width - t - min_lag
            if stop > n_lags:
                stop = n_lags
            for k in range(stop):
                out[f, k] += x * frames[f, t + min_lag + k]
    return energy_arr, out_arr
