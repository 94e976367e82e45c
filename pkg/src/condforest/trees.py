"""Ordered rooted trees, forests and unconditioned Galton-Watson sampling.

A tree is stored as the list of child counts of its vertices visited in
lexicographic (depth-first) order.  This carries the same information as the
increments of the coding walk, so conversions are linear time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import SizeCapExceeded, ValidationError
from .laws import OffspringLaw

DEFAULT_SIZE_CAP = 10**8


def _check_lukasiewicz(counts: np.ndarray) -> None:
    if counts.size == 0:
        raise ValidationError("a tree has at least one vertex")
    if np.any(counts < 0):
        bad = int(np.flatnonzero(counts < 0)[0])
        raise ValidationError(f"negative child count at index {bad}")
    partial = np.cumsum(counts - 1)
    early = np.flatnonzero(partial[:-1] < 0)
    if early.size:
        raise ValidationError(
            f"encoding closes the tree at index {int(early[0])}, before the last vertex"
        )
    if partial[-1] != -1:
        raise ValidationError(
            f"child counts leave {int(partial[-1]) + 1} unexplored vertices"
        )


@dataclass(frozen=True)
class UlamHarrisTree:
    """Rooted ordered tree given by its lexicographic child-count sequence."""

    child_counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.child_counts)
        _check_lukasiewicz(np.asarray(counts, dtype=np.int64))
        object.__setattr__(self, "child_counts", counts)

    @classmethod
    def _trusted(cls, counts: Sequence[int]) -> "UlamHarrisTree":
        obj = object.__new__(cls)
        object.__setattr__(obj, "child_counts", tuple(int(c) for c in counts))
        return obj

    @property
    def size(self) -> int:
        return len(self.child_counts)

    def __len__(self):
        return len(self.child_counts)


@dataclass(frozen=True)
class Forest:
    trees: tuple[UlamHarrisTree, ...]

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        if not self.trees:
            raise ValidationError("a forest needs at least one tree")

    @classmethod
    def from_counts(cls, counts: Iterable[Sequence[int]]) -> "Forest":
        return cls(tuple(UlamHarrisTree(tuple(c)) for c in counts))

    @property
    def total_progeny(self) -> int:
        return sum(t.size for t in self.trees)

    @property
    def child_counts(self) -> np.ndarray:
        return np.concatenate([np.asarray(t.child_counts, dtype=np.int64) for t in self.trees])

    def __len__(self):
        return len(self.trees)


class VertexRow(NamedTuple):
    depth: int
    child_count: int
    parent: int | None


def _tree_length(steps: np.ndarray) -> int | None:
    """Index after which the walk with these increments first hits -1."""
    hit = np.flatnonzero(np.cumsum(steps) == -1)
    return int(hit[0]) + 1 if hit.size else None


def sample_gw_tree(
    law: OffspringLaw, seed, *, size_cap: int = DEFAULT_SIZE_CAP
) -> UlamHarrisTree:
    """Sample a Galton-Watson tree with offspring law ``law``.

    Child counts are drawn in lexicographic vertex order until the coding
    walk first reaches -1, so the work is linear in the tree size and no
    recursion is involved.
    """
    if law.mean > 1.0 + 1e-12:
        raise ValidationError(f"supercritical law (mean {law.mean:.6g}) gives infinite trees")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    chunks = []
    level = 0  # walk value before the current chunk
    block = 64
    drawn = 0
    while True:
        counts = law.sample_children(rng, block)
        walk = level + np.cumsum(counts - 1)
        hit = np.flatnonzero(walk == -1)
        if hit.size:
            end = int(hit[0]) + 1
            if drawn + end > size_cap:
                raise SizeCapExceeded(size_cap)
            chunks.append(counts[:end])
            break
        drawn += block
        if drawn > size_cap:
            raise SizeCapExceeded(size_cap)
        chunks.append(counts)
        level = int(walk[-1])
        block = min(2 * block, 1 << 22)
    return UlamHarrisTree._trusted(np.concatenate(chunks))


def sample_gw_forest(
    law: OffspringLaw, k: int, seed, *, size_cap: int = DEFAULT_SIZE_CAP
) -> Forest:
    """Sample ``k`` independent Galton-Watson trees.

    Tree ``i`` uses its own child stream spawned from ``seed``, so the i-th
    tree does not depend on ``k``.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    streams = np.random.SeedSequence(seed).spawn(k)
    return Forest(
        tuple(
            sample_gw_tree(law, np.random.default_rng(s), size_cap=size_cap) for s in streams
        )
    )


def parents_from_counts(counts: Sequence[int]) -> list[int | None]:
    """Parent index of every vertex, from the lexicographic child counts."""
    parents: list[int | None] = [None] * len(counts)
    # open[-1] is the vertex still waiting for children, with its remaining slots
    open_slots: list[list[int]] = []
    for i, c in enumerate(counts):
        while open_slots and open_slots[-1][1] == 0:
            open_slots.pop()
        if open_slots:
            parents[i] = open_slots[-1][0]
            open_slots[-1][1] -= 1
        if c:
            open_slots.append([i, int(c)])
    return parents


def vertex_table(tree: UlamHarrisTree) -> list[VertexRow]:
    """Depth, child count and parent index of each vertex in lexicographic order."""
    if not isinstance(tree, UlamHarrisTree):
        tree = UlamHarrisTree(tuple(tree))
    parents = parents_from_counts(tree.child_counts)
    depths = [0] * tree.size
    for i in range(1, tree.size):
        depths[i] = depths[parents[i]] + 1
    return [VertexRow(d, c, p) for d, c, p in zip(depths, tree.child_counts, parents)]


def subtree_at(tree: UlamHarrisTree, vertex_index: int) -> UlamHarrisTree:
    """The tree of descendants of vertex ``vertex_index``, re-rooted there."""
    n = tree.size
    if not 0 <= vertex_index < n:
        raise IndexError(f"vertex index {vertex_index} out of range for tree of size {n}")
    steps = np.asarray(tree.child_counts[vertex_index:], dtype=np.int64) - 1
    end = _tree_length(steps)
    return UlamHarrisTree._trusted(tree.child_counts[vertex_index : vertex_index + end])
