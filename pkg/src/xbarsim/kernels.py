"""Hot kernels for applying pulse coincidences to a weight matrix.

Both implementations walk the pulse train slot by slot and, for every
(row fires, column fires) coincidence, move the weight by one pre-drawn
Gaussian step against the update polarity, clipping to the weight bound.
Pre-drawn steps are consumed in (slot, row, column) order; the two
backends are interchangeable bit for bit.
"""

import numpy as np

from .backend import USE_NUMBA, njit


@njit(cache=True)
def apply_coincidences_numba(weights, x_fires, d_fires, sign_x, sign_d, steps, w_bound):
    """Apply coincidence steps in place. Returns the number of steps consumed."""
    bl = x_fires.shape[0]
    d_out, d_in = weights.shape
    cols = np.empty(d_in, np.int64)
    pos = 0
    for t in range(bl):
        n_cols = 0
        for i in range(d_in):
            if x_fires[t, i]:
                cols[n_cols] = i
                n_cols += 1
        if n_cols == 0:
            continue
        for j in range(d_out):
            if d_fires[t, j]:
                sj = sign_d[j]
                for c in range(n_cols):
                    i = cols[c]
                    w = weights[j, i] - steps[pos] * (sj * sign_x[i])
                    pos += 1
                    if w > w_bound:
                        w = w_bound
                    elif w < -w_bound:
                        w = -w_bound
                    weights[j, i] = w
    return pos


def apply_coincidences_numpy(weights, x_fires, d_fires, sign_x, sign_d, steps, w_bound):
    """Pure-numpy twin of apply_coincidences_numba (same step order)."""
    bl = x_fires.shape[0]
    polarity = np.outer(sign_d, sign_x)
    pos = 0
    for t in range(bl):
        mask = np.outer(d_fires[t], x_fires[t])
        count = int(mask.sum())
        if count == 0:
            continue
        delta = np.zeros_like(weights)
        # Row-major assignment into the mask matches the (row, column)
        # consumption order of the compiled kernel.
        delta[mask] = steps[pos:pos + count]
        pos += count
        np.subtract(weights, delta * polarity, out=weights)
        np.clip(weights, -w_bound, w_bound, out=weights)
    return pos


if USE_NUMBA:
    apply_coincidences = apply_coincidences_numba
else:
    apply_coincidences = apply_coincidences_numpy
