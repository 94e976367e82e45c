"""Finite samples of real trees coded by continuous functions."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ._rmq import SparseMin
from .errors import ValidationError
from .stable import RealPath


@dataclass(frozen=True, eq=False)
class FiniteRealTree:
    sample_times: np.ndarray
    dist: np.ndarray
    root_index: int = 0

    def __post_init__(self):
        d = np.asarray(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValidationError("distance matrix must be square")
        object.__setattr__(self, "dist", d)
        object.__setattr__(self, "sample_times", np.asarray(self.sample_times, dtype=float))

    def __len__(self):
        return self.dist.shape[0]

    def is_metric(self, tol: float = 1e-9) -> bool:
        d = self.dist
        if np.any(np.abs(np.diag(d)) > tol) or np.any(np.abs(d - d.T) > tol) or np.any(d < -tol):
            return False
        # d[i,j] <= d[i,k] + d[k,j] for all k
        via = np.min(d[:, :, None] + d[None, :, :], axis=1)
        return bool(np.all(d <= via + tol))


def excursion_metric(f: RealPath, times) -> FiniteRealTree:
    """Pairwise ``d_f(s,t) = f(s) + f(t) - 2 inf_[s,t] f`` at the given times.

    ``f`` is read as the piecewise-linear interpolation of its grid values,
    so the infimum over ``[s, t]`` is attained at ``s``, ``t`` or a grid point
    in between.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValidationError("need at least one sample time")
    if np.any(times < -1e-12) or np.any(times > f.horizon + 1e-12):
        bad = times[(times < 0) | (times > f.horizon)][0]
        raise ValidationError(f"time {bad} outside [0, {f.horizon}]")
    grid = f.times
    vals = np.interp(times, grid, f.values)
    rmq = SparseMin(f.values)
    i, j = np.triu_indices(times.size, k=1)
    a = np.minimum(times[i], times[j])
    b = np.maximum(times[i], times[j])
    lo = np.ceil(a / f.grid_step - 1e-9).astype(np.int64)
    hi = np.floor(b / f.grid_step + 1e-9).astype(np.int64)
    inner = lo <= hi
    low = np.minimum(vals[i], vals[j])
    if inner.any():
        low[inner] = np.minimum(low[inner], rmq.query(lo[inner], hi[inner]))
    dist = np.zeros((times.size, times.size))
    dist[i, j] = vals[i] + vals[j] - 2 * low
    dist[j, i] = dist[i, j]
    return FiniteRealTree(times, dist)


def _violations(d: np.ndarray, quads: np.ndarray, tol: float) -> np.ndarray:
    x, y, z, w = quads.T
    sums = np.stack([d[x, y] + d[z, w], d[x, z] + d[y, w], d[x, w] + d[y, z]], axis=1)
    sums.sort(axis=1)
    # every pairing must be below the max of the other two: the top two agree
    return sums[:, 2] - sums[:, 1] > tol


def check_four_point(tree: FiniteRealTree, tol: float = 1e-9, quadruples=None) -> bool:
    """Four-point condition on all quadruples, or on the given index quadruples."""
    d = tree.dist
    m = d.shape[0]
    if m < 4:
        return True
    if quadruples is None:
        quads = np.array(list(combinations(range(m), 4)), dtype=np.int64)
    else:
        quads = np.asarray(quadruples, dtype=np.int64).reshape(-1, 4)
    return not bool(np.any(_violations(d, quads, tol)))


def gh_comparison(f: RealPath, g: RealPath, times) -> tuple[float, float]:
    """``(sup |d_f - d_g| / 2, 2 sup |f - g|)`` over the sampled pairs.

    The first value is the distortion of the identity correspondence between
    the sampled points, an upper estimate of the Gromov-Hausdorff distance
    between the samples; the second is the sup-norm bound on the distance
    between the coded trees.
    """
    if f.values.size != g.values.size or abs(f.grid_step - g.grid_step) > 1e-12:
        raise ValidationError("f and g must share the same time grid")
    df = excursion_metric(f, times).dist
    dg = excursion_metric(g, times).dist
    return 0.5 * float(np.max(np.abs(df - dg))), 2.0 * float(np.max(np.abs(f.values - g.values)))
