import itertools
from collections import deque

import numpy as np
import pytest

from condforest.laws import OffspringLaw
from condforest.trees import UlamHarrisTree

FIG1_COUNTS = (3, 2, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0)
FIG1_WALK = [0, 2, 3, 5, 4, 3, 2, 3, 2, 1, 0, 1, 0, -1]
FIG1_DEPTHS = [0, 1, 2, 3, 3, 3, 2, 3, 3, 1, 1, 2, 2]


@pytest.fixture
def fig1():
    return UlamHarrisTree(FIG1_COUNTS)


@pytest.fixture
def binary():
    return OffspringLaw.binary()


@pytest.fixture
def geometric():
    return OffspringLaw.geometric()


def all_trees(size):
    """Every ordered tree with ``size`` vertices, as child-count tuples."""
    out = []

    def extend(prefix, open_slots):
        remaining = size - len(prefix)
        if open_slots == 0:
            if remaining == 0:
                out.append(tuple(prefix))
            return
        if remaining < open_slots:
            return
        for c in range(remaining - open_slots + 1):
            extend(prefix + [c], open_slots - 1 + c)

    extend([], 1)
    return out


def all_forests(max_progeny):
    """Every forest (tuple of trees) with total progeny at most ``max_progeny``."""
    by_size = {m: all_trees(m) for m in range(1, max_progeny + 1)}
    out = []

    def extend(prefix, used):
        if prefix:
            out.append(tuple(prefix))
        for m in range(1, max_progeny - used + 1):
            for t in by_size[m]:
                extend(prefix + [t], used + m)

    extend([], 0)
    return out


def bfs_distances(counts):
    """Graph distances from every vertex, by breadth-first search on the edge list."""
    n = len(counts)
    adj = [[] for _ in range(n)]
    stack = []
    for i, c in enumerate(counts):
        while stack and stack[-1][1] == 0:
            stack.pop()
        if stack:
            parent = stack[-1][0]
            stack[-1][1] -= 1
            adj[parent].append(i)
            adj[i].append(parent)
        if c:
            stack.append([i, c])
    dist = np.zeros((n, n), dtype=np.int64)
    for src in range(n):
        seen = {src: 0}
        queue = deque([src])
        while queue:
            v = queue.popleft()
            for w in adj[v]:
                if w not in seen:
                    seen[w] = seen[v] + 1
                    queue.append(w)
        dist[src] = [seen[v] for v in range(n)]
    return dist


def enumerate_first_passage(q, k, n):
    """Conditioned law of step sequences: dict ``steps tuple -> probability``.

    Brute force over all ``len(q) ** n`` step sequences.
    """
    steps = np.arange(-1, len(q) - 1)
    digits = np.array(list(itertools.product(range(len(q)), repeat=n)), dtype=np.int64)
    if digits.size == 0:
        return {}
    seq = steps[digits]
    walk = np.cumsum(seq, axis=1)
    ok = (walk[:, -1] == -k) & np.all(walk[:, :-1] > -k, axis=1)
    probs = np.prod(np.asarray(q)[digits[ok]], axis=1)
    keep = probs > 0
    seq, probs = seq[ok][keep], probs[keep]
    if probs.size == 0:
        return {}
    probs = probs / probs.sum()
    return {tuple(r): p for r, p in zip(seq.tolist(), probs)}


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
