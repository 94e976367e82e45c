"""Deterministic codings of forests: walk, height, contour and tree distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .trees import Forest, UlamHarrisTree, parents_from_counts


class LatticePath:
    """Integer walk started at 0 whose downward steps are exactly -1."""

    __slots__ = ("values",)

    def __init__(self, values):
        values = np.array(values, dtype=np.int64)
        if values.ndim != 1 or values.size == 0:
            raise ValidationError("a lattice path needs at least one value")
        if values[0] != 0:
            raise ValidationError(f"lattice path must start at 0, got {values[0]}")
        jumps = np.flatnonzero(np.diff(values) < -1)
        if jumps.size:
            i = int(jumps[0])
            raise ValidationError(
                f"downward jump of {values[i + 1] - values[i]} between indices {i} and {i + 1}"
            )
        values.setflags(write=False)
        self.values = values

    @classmethod
    def from_increments(cls, steps) -> "LatticePath":
        steps = np.asarray(steps, dtype=np.int64)
        return cls(np.concatenate([[0], np.cumsum(steps)]))

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    @property
    def n_steps(self) -> int:
        return self.values.size - 1

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if isinstance(other, LatticePath):
            return np.array_equal(self.values, other.values)
        return NotImplemented

    def __hash__(self):
        return hash(self.values.tobytes())

    def __repr__(self):
        head = ", ".join(str(v) for v in self.values[:12])
        more = ", ..." if self.values.size > 12 else ""
        return f"LatticePath([{head}{more}])"


def _as_values(path) -> np.ndarray:
    if isinstance(path, LatticePath):
        return path.values
    return LatticePath(path).values


def walk_from_forest(forest: Forest | UlamHarrisTree) -> LatticePath:
    if isinstance(forest, UlamHarrisTree):
        forest = Forest((forest,))
    steps = forest.child_counts - 1
    return LatticePath(np.concatenate([[0], np.cumsum(steps)]))


def first_passage_index(path, k: int) -> int | None:
    """Smallest index at which the path equals ``-k``, or ``None``."""
    values = _as_values(path)
    hit = np.flatnonzero(values == -k)
    return int(hit[0]) if hit.size else None


def forest_from_walk(path) -> Forest:
    """Invert :func:`walk_from_forest`.

    The path must end at ``-k`` for some ``k >= 1`` and reach ``-k`` for the
    first time at its last index.
    """
    values = _as_values(path)
    if values.size < 2:
        raise ValidationError("index 0: a forest walk needs at least one step")
    k = -int(values[-1])
    if k < 1:
        raise ValidationError(
            f"index {values.size - 1}: walk ends at {values[-1]}, not at a negative level"
        )
    early = np.flatnonzero(values[:-1] <= -k)
    if early.size:
        raise ValidationError(
            f"index {int(early[0])}: walk reaches -{k} before its last index"
        )
    # new minima -1..-k split the walk into trees
    cuts = np.searchsorted(-np.minimum.accumulate(values), np.arange(1, k + 1))
    counts = np.diff(values) + 1
    trees = []
    start = 0
    for end in cuts:
        trees.append(UlamHarrisTree._trusted(counts[start:end]))
        start = int(end)
    return Forest(tuple(trees))


def height_sequence(values) -> np.ndarray:
    """Height process ``H_n`` for every index ``n`` of a skip-free walk.

    ``H_n`` counts the indices ``j < n`` at which the walk sits at its
    minimum over ``[j, n]``.  Index ``j`` stops counting at the first later
    index where the walk drops below ``S_j``; because downward steps are -1
    that is the first later visit to ``S_j - 1``, found for all ``j`` at once
    with one sort.
    """
    values = np.asarray(values, dtype=np.int64)
    if values.ndim == 2:
        return _height_rows(values)
    size = values.size
    if size == 0:
        return np.zeros(0, dtype=np.int64)
    lo = int(values.min())
    idx = np.arange(size, dtype=np.int64)
    keys = (values - lo) * size + idx
    order = np.sort(keys)
    query = (values - 1 - lo) * size + idx
    pos = np.searchsorted(order, query, side="right")
    pos_ok = pos < size
    found = np.where(pos_ok, order[np.minimum(pos, size - 1)], -1)
    hit = pos_ok & (values - 1 >= lo) & (found // size == values - 1 - lo)
    death = np.where(hit, found % size, size)
    delta = np.bincount(idx + 1, minlength=size + 1) - np.bincount(death, minlength=size + 1)
    return np.cumsum(delta[:size])


def _height_rows(values: np.ndarray) -> np.ndarray:
    """Row-wise heights for many short walks of equal length.

    One right-to-left sweep keeps, per row, the next index at which each
    level is visited; the death of index ``j`` is the next visit to
    ``S_j - 1``.  Linear in the number of entries.
    """
    rows, size = values.shape
    if size == 0 or rows == 0:
        return np.zeros((rows, size), dtype=np.int64)
    lo = values.min(axis=1, keepdims=True)
    width = int((values - lo).max()) + 2
    # flat index of level S_j in row r; level S_j - 1 sits one to the left
    flat = values - lo + 1 + (np.arange(rows) * width)[:, None]
    next_at = np.full(rows * width, size, dtype=np.int64)
    delta = np.zeros((rows, size + 1), dtype=np.int64)
    delta[:, 1:] = 1
    dflat = delta.ravel()
    dbase = np.arange(rows) * (size + 1)
    for j in range(size - 1, -1, -1):
        dflat[dbase + next_at[flat[:, j] - 1]] -= 1
        next_at[flat[:, j]] = j
    return np.cumsum(delta[:, :size], axis=1)


def height_from_walk(path) -> np.ndarray:
    """Heights ``H_0 .. H_{m-1}`` of the forest coded by a walk with ``m`` steps."""
    values = _as_values(path)
    return height_sequence(values)[:-1]


def height_literal(values) -> np.ndarray:
    """Quadratic evaluation of the counting formula, kept as an oracle."""
    values = np.asarray(values)
    out = np.zeros(values.size, dtype=np.int64)
    for n in range(values.size):
        count = 0
        for k in range(n):
            if values[k] == values[k : n + 1].min():
                count += 1
        out[n] = count
    return out


@dataclass(frozen=True, eq=False)
class ContourFn:
    """Contour function stored by its values at integer times ``0..duration``.

    All slopes are +1, -1 or 0 between consecutive integers, so linear
    interpolation gives the function exactly.
    """

    values: np.ndarray

    @property
    def duration(self) -> int:
        return self.values.size - 1

    def __call__(self, t):
        return np.interp(t, np.arange(self.values.size), self.values)

    def extremes(self) -> list[int]:
        """Successive local extremes, with flat stretches collapsed."""
        v = self.values.tolist()
        pts = [v[0]]
        for x in v[1:]:
            if x != pts[-1]:
                pts.append(x)
        out = [pts[0]]
        for i in range(1, len(pts) - 1):
            if (pts[i] - pts[i - 1]) * (pts[i + 1] - pts[i]) < 0:
                out.append(pts[i])
        if len(pts) > 1:
            out.append(pts[-1])
        return out

    def half_grid(self) -> tuple[np.ndarray, np.ndarray]:
        t = np.arange(2 * self.duration + 1) / 2.0
        return t, self(t)

    def __eq__(self, other):
        if isinstance(other, ContourFn):
            return np.array_equal(self.values, other.values)
        return NotImplemented


def contour_times(h) -> np.ndarray:
    """``K_n = 2n - H_n`` for ``n = 0..m`` with the closing convention ``H_m = 0``."""
    h = np.concatenate([np.asarray(h, dtype=np.int64), [0]])
    return 2 * np.arange(h.size) - h


def contour_from_height(h) -> ContourFn:
    """Contour of the forest whose height sequence is ``h``.

    Each tree of size ``z`` contributes its exploration on ``[0, 2(z-1)]``
    followed by a flat unit at zero, so the duration is ``2 * len(h)``.
    """
    h = np.asarray(h, dtype=np.int64)
    if h.size == 0 or h[0] != 0:
        raise ValidationError("height sequence must be non-empty and start at 0")
    if np.any(np.diff(h) > 1):
        raise ValidationError("height can increase by at most 1 per step")
    hh = np.concatenate([h, [0]])
    K = contour_times(h)
    m = h.size
    t = np.arange(2 * m + 1)
    n = np.clip(np.searchsorted(K, t, side="right") - 1, 0, m - 1)
    k_next = K[n + 1]
    down = np.maximum(hh[n] - (t - K[n]), 0)
    up = np.maximum(hh[n + 1] - (k_next - t), 0)
    vals = np.where(t <= k_next - 1, down, up)
    vals[-1] = 0
    return ContourFn(vals.astype(np.int64))


def _lca(parents, depths, a, b):
    while depths[a] > depths[b]:
        a = parents[a]
    while depths[b] > depths[a]:
        b = parents[b]
    while a != b:
        a, b = parents[a], parents[b]
    return a


def tree_distance(tree: UlamHarrisTree, n: int, m: int) -> int:
    """Edge distance between vertices ``n`` and ``m`` via their last common ancestor."""
    size = tree.size
    for v in (n, m):
        if not 0 <= v < size:
            raise IndexError(f"vertex index {v} out of range for tree of size {size}")
    parents = parents_from_counts(tree.child_counts)
    depths = height_sequence(walk_from_forest(tree).values)
    k = _lca(parents, depths, n, m)
    return int(depths[n] + depths[m] - 2 * depths[k])


def distance_matrix(tree: UlamHarrisTree) -> np.ndarray:
    parents = parents_from_counts(tree.child_counts)
    depths = height_sequence(walk_from_forest(tree).values)
    size = tree.size
    out = np.zeros((size, size), dtype=np.int64)
    for a in range(size):
        for b in range(a + 1, size):
            k = _lca(parents, depths, a, b)
            out[a, b] = out[b, a] = depths[a] + depths[b] - 2 * depths[k]
    return out


def cyclic_shift(path, k: int) -> LatticePath:
    """Swap the parts of the path before and after its first visit to ``-k``.

    Both parts are re-based so that the result starts at 0; the terminal
    value is unchanged.  Equivalently the increments are rotated by the
    passage time.
    """
    values = _as_values(path)
    t = first_passage_index(values, k)
    if t is None:
        raise ValidationError(f"path never reaches level -{k}")
    steps = np.diff(values)
    return LatticePath.from_increments(np.concatenate([steps[t:], steps[:t]]))


def rotate_sequence(seq, t: int) -> np.ndarray:
    """``seq`` of length ``n+1`` read from index ``t``, wrapping through index 0."""
    seq = np.asarray(seq)
    n = seq.size - 1
    if t == 0 or t >= n:
        return seq.copy()
    return np.concatenate([seq[t:n], seq[: t + 1]])


def height_of_shift_check(path, k: int) -> bool:
    """Whether the height of the shifted walk equals the shifted height."""
    values = _as_values(path)
    t = first_passage_index(values, k)
    if t is None:
        raise ValidationError(f"path never reaches level -{k}")
    shifted = cyclic_shift(values, k)
    lhs = height_sequence(shifted.values)
    rhs = rotate_sequence(height_sequence(values), t)
    return bool(np.array_equal(lhs, rhs))
