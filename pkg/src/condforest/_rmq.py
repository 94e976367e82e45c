"""Sparse-table range minimum queries."""

from __future__ import annotations

import numpy as np


class SparseMin:
    """``O(1)`` minimum over ``values[i..j]`` after an ``O(n log n)`` build."""

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        self.size = values.size
        self.levels = [values]
        width = 1
        while 2 * width <= self.size:
            prev = self.levels[-1]
            self.levels.append(np.minimum(prev[:-width], prev[width:]))
            width *= 2

    def query(self, i, j):
        """Minimum over the closed index range ``[min(i,j), max(i,j)]``, elementwise."""
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        lo = np.minimum(i, j)
        hi = np.maximum(i, j)
        span = hi - lo + 1
        k = np.floor(np.log2(span)).astype(np.int64)
        out = np.empty(np.broadcast(lo, hi).shape)
        for level in np.unique(k):
            sel = k == level
            tab = self.levels[level]
            out[sel] = np.minimum(tab[lo[sel]], tab[hi[sel] - (1 << level) + 1])
        return out

    def first_below(self, start, threshold):
        """First index ``>= start`` whose value is ``<= threshold``; ``size`` if none.

        Vectorised binary lifting: jump over blocks whose minimum stays above
        the threshold, largest blocks first.
        """
        pos = np.asarray(start, dtype=np.int64).copy()
        threshold = np.asarray(threshold, dtype=float)
        for level in range(len(self.levels) - 1, -1, -1):
            tab = self.levels[level]
            ok = pos < tab.size
            idx = np.where(ok, pos, 0)
            jump = ok & (tab[idx] > threshold)
            pos = pos + np.where(jump, 1 << level, 0)
        return np.minimum(pos, self.size)
