"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def dtw_accumulate(cost):
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    n, m = cost.shape
    acc = np.empty((n, m))
    acc[0] = np.cumsum(cost[0])
    for i in range(1, n):
        prev = acc[i - 1]
        row = acc[i]
        row[0] = prev[0] + cost[i, 0]
        # vertical/diagonal part is vectorizable, the left neighbour is not
        best_vd = np.minimum(prev[1:], prev[:-1]) + cost[i, 1:]
        for j in range(1, m):
            left = row[j - 1] + cost[i, j]
            row[j] = best_vd[j - 1] if best_vd[j - 1] <= left else left
    return acc


def dtw_backtrack(acc):
    i, j = acc.shape[0] - 1, acc.shape[1] - 1
    path = [(i, j)]
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag, up, left = acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1]
            if diag <= up and diag <= left:
                i, j = i - 1, j - 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        path.append((i, j))
    path.reverse()
    return np.asarray(path, dtype=np.int64)


def frame_autocorr(frames, min_lag, max_lag):
    frames = np.asarray(frames, dtype=np.float64)
    width = frames.shape[1]
    nfft = 1 << int(np.ceil(np.log2(2 * width)))
    spec = np.fft.rfft(frames, n=nfft, axis=1)
    acf = np.fft.irfft(spec.real ** 2 + spec.imag ** 2, n=nfft, axis=1)
    return acf[:, 0].copy(), acf[:, min_lag:max_lag + 1].copy()
