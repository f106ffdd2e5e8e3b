"""Numpy fallback for the compiled kernels in ``_ckernels``.

Same signatures and results; used when the extension is not built or when
``BUGLENS_PURE_PYTHON`` is set.
"""

import numpy as np


def bisect_matrix(timestamps):
    t = np.asarray(timestamps, dtype=np.int64)
    return np.abs(t[:, None] - t[None, :]).astype(np.float64)


def mismatch_matrix(levels, bits):
    lv = np.asarray(levels, dtype=np.int64)
    b = np.asarray(bits, dtype=np.int64)
    # |a xor b| summed = a.(1-b) + (1-a).b
    counts = b @ (1 - b).T
    counts = counts + counts.T
    return counts + (lv[:, None] != lv[None, :])


def fpf_order(dist, start):
    dist = np.asarray(dist, dtype=np.float64)
    n = dist.shape[0]
    order = np.empty(n, dtype=np.int64)
    if n == 0:
        return order
    mind = dist[start].copy()
    mind[start] = -np.inf
    order[0] = start
    for k in range(1, n):
        best = int(np.argmax(mind))
        order[k] = best
        mind[best] = -np.inf
        # already-chosen slots stay at -inf through the minimum
        np.minimum(mind, dist[best], out=mind)
    return order
