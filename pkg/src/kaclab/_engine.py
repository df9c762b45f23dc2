"""Compiled inner loops for weight-array growth."""

from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True, nogil=True)
def grow_segments(sizes, u_idx, left, right, out):
    """Grow one weight array per entry of ``sizes`` into the flat buffer ``out``.

    Replica i occupies out[off_i : off_i + sizes[i]] and consumes sizes[i] - 1
    entries of ``u_idx``, ``left`` and ``right``. A split at current size k
    picks I = floor(u * k), writes w[I] * L in place and appends w[I] * R.
    """
    off = 0
    draw = 0
    for i in range(sizes.shape[0]):
        n = sizes[i]
        out[off] = 1.0
        for k in range(1, n):
            j = int(u_idx[draw] * k)
            if j >= k:
                j = k - 1
            b = out[off + j]
            out[off + j] = b * left[draw]
            out[off + k] = b * right[draw]
            draw += 1
        off += n
    return out


@numba.njit(cache=True, nogil=True)
def segment_sums(sizes, values):
    res = np.empty(sizes.shape[0])
    off = 0
    for i in range(sizes.shape[0]):
        s = 0.0
        for j in range(off, off + sizes[i]):
            s += values[j]
        res[i] = s
        off += sizes[i]
    return res


@numba.njit(cache=True, nogil=True)
def segment_dot(sizes, w, x):
    res = np.empty(sizes.shape[0])
    off = 0
    for i in range(sizes.shape[0]):
        s = 0.0
        for j in range(off, off + sizes[i]):
            s += w[j] * x[j]
        res[i] = s
        off += sizes[i]
    return res


@numba.njit(cache=True, nogil=True)
def segment_power_sums(sizes, w, p):
    """Sum of w**p per segment with 0**p = 0 for every p (including p = 0)."""
    res = np.empty(sizes.shape[0])
    off = 0
    for i in range(sizes.shape[0]):
        s = 0.0
        for j in range(off, off + sizes[i]):
            if w[j] > 0.0:
                s += w[j] ** p
        res[i] = s
        off += sizes[i]
    return res
