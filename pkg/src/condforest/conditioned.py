"""Exact sampling of Galton-Watson forests conditioned on their total progeny.

A forest with ``k`` trees and ``n`` vertices is coded by a walk with step
law ``nu`` that first reaches ``-k`` at time ``n``.  Sampling is done in two
stages:

1. draw ``n`` steps i.i.d. ``nu`` conditioned on their sum being ``-k``
   (a bridge).  The steps are first exponentially tilted so that ``-k/n`` is
   the mean step; conditioning on the sum makes the tilt invisible, but it
   keeps every rejection step below well-conditioned.  The bridge is then
   built by recursive halving: the first half of the remaining steps is
   drawn unconditioned and accepted with probability proportional to the
   probability that the second half closes the bridge.  Short remainders
   are filled step by step from exact convolution tables.
2. among the ``n`` cyclic rotations of the bridge exactly ``k`` are
   first-passage paths; one of them is chosen uniformly.

Both stages preserve the conditional law exactly.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import lru_cache
from math import gcd

import numpy as np
from scipy import fft as sfft
from scipy.optimize import brentq
from scipy.special import logsumexp

from .coding import LatticePath, first_passage_index, forest_from_walk
from .errors import InfeasibleSpecError, ValidationError
from .laws import OffspringLaw
from .trees import Forest

EXACT_CONV_LEN = 4096
DEFAULT_BASE = 16
TRUNCATION_TOL = 1e-8


# -- step-sum distributions ---------------------------------------------------

def pmf_power(p: np.ndarray, m: int) -> np.ndarray:
    """Distribution of the sum of ``m`` i.i.d. copies of ``p`` (index 0 is the minimum)."""
    p = np.asarray(p, dtype=float)
    if m == 0:
        return np.ones(1)
    out_len = m * (p.size - 1) + 1
    if out_len <= EXACT_CONV_LEN:
        result = np.ones(1)
        base = p
        e = m
        while e:
            if e & 1:
                result = np.convolve(result, base)
            e >>= 1
            if e:
                base = np.convolve(base, base)
        return result
    nfft = sfft.next_fast_len(out_len, real=True)
    spec = sfft.rfft(p, nfft) ** m
    res = sfft.irfft(spec, nfft)[:out_len]
    np.clip(res, 0.0, None, out=res)
    return res / res.sum()


def step_sum_pmf(law: OffspringLaw, n: int) -> tuple[int, np.ndarray]:
    """``(offset, pmf)`` with ``pmf[i] = P(S_n = offset + i)``."""
    return -n, pmf_power(law.step_pmf, n)


def _representable(children: int, support: np.ndarray) -> bool:
    """Whether ``children`` is a sum of positive support points (repetition allowed)."""
    if children == 0:
        return True
    coins = [int(c) for c in support if c > 0]
    if not coins:
        return False
    g = 0
    for c in coins:
        g = gcd(g, c)
    if children % g:
        return False
    # smallest representable value in each residue class modulo the smallest coin
    b0 = min(coins)
    best = [None] * b0
    best[0] = 0
    heap = [(0, 0)]
    while heap:
        d, r = heapq.heappop(heap)
        if d != best[r]:
            continue
        for c in coins:
            nd = d + c
            nr = nd % b0
            if best[nr] is None or nd < best[nr]:
                best[nr] = nd
                heapq.heappush(heap, (nd, nr))
    low = best[children % b0]
    return low is not None and children >= low


def is_feasible(law: OffspringLaw, k: int, n: int) -> bool:
    """Exact test of ``P(T_k = n) > 0``."""
    if not 1 <= k <= n:
        return False
    if law.pmf[0] <= 0:
        return False
    # the n vertices have n - k children in total
    return _representable(n - k, np.flatnonzero(law.pmf))


def _tilt(q: np.ndarray, target_mean: float) -> tuple[float, np.ndarray]:
    """Exponential tilt of a step pmf (offset -1) to the given mean."""
    steps = np.arange(-1, q.size - 1, dtype=float)
    support = q > 0
    logq = np.where(support, np.log(np.where(support, q, 1.0)), -np.inf)
    lo, hi = steps[support].min(), steps[support].max()
    if not lo < target_mean < hi:
        raise ValueError("target mean on the boundary of the support")

    def mean_at(theta):
        w = logq + theta * steps
        w = np.exp(w - logsumexp(w))
        return float(np.dot(w, steps)) - target_mean

    if abs(mean_at(0.0)) < 1e-15:
        return 0.0, q.copy()
    a, b = -1.0, 1.0
    while mean_at(a) > 0:
        a *= 2
    while mean_at(b) < 0:
        b *= 2
    theta = brentq(mean_at, a, b, xtol=1e-14, rtol=1e-14, maxiter=500)
    w = logq + theta * steps
    return theta, np.exp(w - logsumexp(w))


def log_step_sum_prob(law: OffspringLaw, n: int, value: int) -> float:
    """``log P(S_n = value)``, accurate even when the probability underflows."""
    if n == 0:
        return 0.0 if value == 0 else -np.inf
    q = law.step_pmf
    steps = np.arange(-1, q.size - 1)
    support = steps[q > 0]
    if value < n * support.min() or value > n * support.max():
        return -np.inf
    if value == n * support.min():
        return n * float(np.log(q[support.min() + 1]))
    if value == n * support.max():
        return n * float(np.log(q[support.max() + 1]))
    theta, qt = _tilt(q, value / n)
    logphi = float(logsumexp(np.log(q[q > 0]) + theta * support))
    tilted = pmf_power(qt, n)[value + n]
    if tilted <= 0:
        return -np.inf
    return n * logphi - theta * value + float(np.log(tilted))


def walk_hitting_pmf(law: OffspringLaw, k: int, n: int) -> float:
    """``P(T_k = n)`` for the coding walk, through ``(k/n) P(S_n = -k)``."""
    if n < 1 or k < 0:
        raise ValidationError("need n >= 1 and k >= 0")
    if law.truncated_mass * n > TRUNCATION_TOL:
        raise ValidationError(
            f"law truncation error {law.truncated_mass * n:.3g} exceeds {TRUNCATION_TOL:g}"
        )
    if k == 0:
        return 0.0
    if not is_feasible(law, k, n):
        return 0.0
    if n * (law.step_pmf.size - 1) + 1 <= EXACT_CONV_LEN:
        off, pmf = step_sum_pmf(law, n)
        return k / n * float(pmf[-k - off])
    return k / n * float(np.exp(log_step_sum_prob(law, n, -k)))


def hitting_time_pmf(law: OffspringLaw, k: int, n_max: int) -> np.ndarray:
    """``P(T_k = j)`` for ``j = 0..n_max`` without using the hitting-time identity.

    The law of ``T_1`` comes from the walk killed on reaching -1; ``T_k`` is a
    sum of ``k`` independent copies of ``T_1`` because the walk cannot jump
    over a level on the way down.
    """
    q = law.step_pmf
    # state v >= 0; values above n_max can never return to -1 in time
    cap = n_max + 1
    alive = np.zeros(cap)
    alive[0] = 1.0
    t1 = np.zeros(n_max + 1)
    for j in range(1, n_max + 1):
        nxt = np.convolve(alive, q)  # index i + s for step s-1
        # new state v' = v + (s - 1): index in nxt is v + s = v' + 1
        t1[j] = nxt[0]
        alive = nxt[1 : cap + 1]
        if alive.size < cap:
            alive = np.pad(alive, (0, cap - alive.size))
    out = np.zeros(n_max + 1)
    out[0] = 1.0
    for _ in range(k):
        out = np.convolve(out, t1)[: n_max + 1]
    return out


# -- sampler --------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionedForestSpec:
    law: OffspringLaw
    k: int
    n: int

    def hitting_probability(self) -> float:
        return walk_hitting_pmf(self.law, self.k, self.n)

    def validate(self) -> "ConditionedForestSpec":
        if not 1 <= self.k <= self.n:
            raise ValidationError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if not is_feasible(self.law, self.k, self.n):
            raise InfeasibleSpecError(
                f"infeasible: P(T_{self.k}={self.n})=0 for this offspring law", 0.0
            )
        return self


def good_rotations(walks: np.ndarray, k: int) -> np.ndarray:
    """Mask of rotation indices ``r`` turning each bridge into a first-passage path.

    ``walks`` has shape ``(rows, n+1)`` with ``walks[:, -1] == -k``.  Rotating at
    ``r`` means reading the increments from ``r`` cyclically.
    """
    x = walks[:, :-1]
    prev_min = np.empty_like(x)
    prev_min[:, 0] = np.iinfo(x.dtype).max
    if x.shape[1] > 1:
        prev_min[:, 1:] = np.minimum.accumulate(x[:, :-1], axis=1)
    suffix_min = np.minimum.accumulate(x[:, ::-1], axis=1)[:, ::-1]
    return (x < prev_min) & (suffix_min > x - k)


def _step_dtype(max_step: int):
    return np.int8 if max_step < 127 else np.int32


class FirstPassageSampler:
    """Exact sampler of the coding walk of a conditioned forest.

    Tables depend only on ``(law, k, n)``; build once and draw many samples.
    """

    def __init__(self, spec: ConditionedForestSpec, base: int = DEFAULT_BASE):
        spec.validate()
        self.spec = spec
        self.k, self.n = spec.k, spec.n
        self.base = max(1, int(base))
        q = spec.law.step_pmf
        self.steps = np.arange(-1, q.size - 1)
        self.dtype = _step_dtype(int(self.steps.max()))
        self.degenerate = None
        support = self.steps[q > 0]
        mean = -self.k / self.n
        if mean <= support.min() or mean >= support.max():
            # only one admissible step sequence
            self.degenerate = int(round(mean))
            return
        self.theta, self.q = _tilt(q, mean)
        self.cdf = np.cumsum(self.q)
        self.cdf[-1] = 1.0
        self.levels = []
        m = self.n
        while m > self.base:
            L = m // 2
            self.levels.append((m - L, L))
            m = L
        self.tail = m
        self._tables = {}
        for first, L in self.levels:
            f = self._table(L)
            self._tables[L] = (f, f.max())
        for j in range(self.tail + 1):
            self._table(j)

    def _table(self, m: int) -> np.ndarray:
        if m not in self._tables:
            self._tables[m] = pmf_power(self.q, m)
        tab = self._tables[m]
        return tab[0] if isinstance(tab, tuple) else tab

    def _lookup(self, m: int, values: np.ndarray) -> np.ndarray:
        """``P(sum of m tilted steps == values)`` elementwise."""
        tab = self._table(m)
        idx = values + m
        ok = (idx >= 0) & (idx < tab.size)
        return np.where(ok, tab[np.clip(idx, 0, tab.size - 1)], 0.0)

    # stage 1 ----------------------------------------------------------------
    def sample_bridges(self, rng: np.random.Generator, rows: int) -> np.ndarray:
        """Step sequences of ``rows`` bridges, shape ``(rows, n)``."""
        n = self.n
        out = np.empty((rows, n), dtype=self.dtype)
        if self.degenerate is not None:
            out[:] = self.degenerate
            return out
        target = np.full(rows, -self.k, dtype=np.int64)
        pos = 0
        for first, L in self.levels:
            f_L, f_max = self._tables[L]
            pending = np.arange(rows)
            while pending.size:
                u = rng.random((pending.size, first))
                block = (np.searchsorted(self.cdf, u, side="right") - 1).astype(self.dtype)
                total = block.sum(axis=1, dtype=np.int64)
                rest = target[pending] - total
                idx = rest + L
                ok = (idx >= 0) & (idx < f_L.size)
                prob = np.where(ok, f_L[np.clip(idx, 0, f_L.size - 1)], 0.0) / f_max
                acc = rng.random(pending.size) < prob
                rows_acc = pending[acc]
                out[rows_acc, pos : pos + first] = block[acc]
                target[rows_acc] = rest[acc]
                pending = pending[~acc]
            pos += first
        for j in range(self.tail, 0, -1):
            cand = target[:, None] - self.steps[None, :]
            w = self.q[None, :] * self._lookup(j - 1, cand)
            cum = np.cumsum(w, axis=1)
            u = rng.random(rows) * cum[:, -1]
            choice = np.minimum((u[:, None] >= cum).sum(axis=1), self.steps.size - 1)
            step = self.steps[choice]
            out[:, pos] = step
            target -= step
            pos += 1
        return out

    # stage 2 ----------------------------------------------------------------
    def rotate_to_first_passage(self, rng: np.random.Generator, steps: np.ndarray) -> np.ndarray:
        rows, n = steps.shape
        walks = np.zeros((rows, n + 1), dtype=np.int64)
        np.cumsum(steps, axis=1, out=walks[:, 1:])
        good = good_rotations(walks, self.k)
        counts = good.sum(axis=1)
        if np.any(counts != self.k):
            raise AssertionError("cycle lemma violated: wrong number of good rotations")
        pick = rng.integers(0, self.k, size=rows)
        r = np.argmax(np.cumsum(good, axis=1) > pick[:, None], axis=1)
        cols = (np.arange(n)[None, :] + r[:, None]) % n
        return np.take_along_axis(steps, cols, axis=1)

    def sample_steps(self, rng: np.random.Generator, rows: int) -> np.ndarray:
        """Increments of ``rows`` independent first-passage bridges, shape ``(rows, n)``."""
        chunk = max(1, 4_000_000 // max(self.n, 1))
        parts = []
        done = 0
        while done < rows:
            m = min(chunk, rows - done)
            parts.append(self.rotate_to_first_passage(rng, self.sample_bridges(rng, m)))
            done += m
        return np.concatenate(parts) if parts else np.empty((0, self.n), dtype=self.dtype)

    def sample_walks(self, rng: np.random.Generator, rows: int) -> np.ndarray:
        steps = self.sample_steps(rng, rows)
        walks = np.zeros((rows, self.n + 1), dtype=np.int64)
        np.cumsum(steps, axis=1, out=walks[:, 1:])
        return walks

    def iter_walks(self, rng: np.random.Generator, rows: int, chunk: int | None = None):
        """Yield walks in blocks of at most ``chunk`` rows, ``rows`` in total."""
        chunk = chunk or max(1, 4_000_000 // max(self.n, 1))
        done = 0
        while done < rows:
            m = min(chunk, rows - done)
            yield self.sample_walks(rng, m)
            done += m

    # exact law of the procedure ------------------------------------------------
    def bridge_probability(self, steps: np.ndarray) -> np.ndarray:
        """Probability that stage 1 outputs each row of ``steps``.

        Follows the same recursion as :meth:`sample_bridges`: an accepted block
        has probability ``q(block) f_L(rest) / (f_first * f_L)(target)``, where
        the denominator is the acceptance rate of the rejection loop.
        """
        steps = np.atleast_2d(np.asarray(steps, dtype=np.int64))
        rows = steps.shape[0]
        if self.degenerate is not None:
            return np.all(steps == self.degenerate, axis=1).astype(float)
        prob = np.ones(rows)
        target = np.full(rows, -self.k, dtype=np.int64)
        pos = 0
        for first, L in self.levels:
            block = steps[:, pos : pos + first]
            total = block.sum(axis=1)
            f_first = pmf_power(self.q, first)
            norm = np.convolve(f_first, self._table(L))
            idx = target + first + L
            ok = (idx >= 0) & (idx < norm.size)
            z = np.where(ok, norm[np.clip(idx, 0, norm.size - 1)], 0.0)
            num = np.prod(self.q[block + 1], axis=1) * self._lookup(L, target - total)
            prob *= np.divide(num, z, out=np.zeros(rows), where=z > 0)
            target = target - total
            pos += first
        for j in range(self.tail, 0, -1):
            cand = target[:, None] - self.steps[None, :]
            w = self.q[None, :] * self._lookup(j - 1, cand)
            s = steps[:, pos]
            num = w[np.arange(rows), s + 1]
            den = w.sum(axis=1)
            prob *= np.divide(num, den, out=np.zeros(rows), where=den > 0)
            target = target - s
            pos += 1
        return prob

    def output_probability(self, fp_steps: np.ndarray) -> np.ndarray:
        """Exact probability that :meth:`sample_steps` returns each given row.

        Every bridge ``x`` whose rotation at a good index ``r`` gives the row
        contributes ``P(x) / #good(x)``.
        """
        fp_steps = np.atleast_2d(np.asarray(fp_steps, dtype=np.int64))
        rows, n = fp_steps.shape
        total = np.zeros(rows)
        for r in range(n):
            # x with rotation at r equal to y: x = y read from n - r
            cols = (np.arange(n) - r) % n
            x = fp_steps[:, cols]
            walks = np.zeros((rows, n + 1), dtype=np.int64)
            np.cumsum(x, axis=1, out=walks[:, 1:])
            good = good_rotations(walks, self.k)
            hits = good[:, r]
            p = self.bridge_probability(x)
            total += np.where(hits, p / np.maximum(good.sum(axis=1), 1), 0.0)
        return total


@lru_cache(maxsize=32)
def _cached_sampler(spec: ConditionedForestSpec, base: int) -> FirstPassageSampler:
    return FirstPassageSampler(spec, base)


def get_sampler(spec: ConditionedForestSpec, base: int = DEFAULT_BASE) -> FirstPassageSampler:
    return _cached_sampler(spec, base)


def sample_first_passage_bridge_walk(spec: ConditionedForestSpec, seed) -> LatticePath:
    """One walk distributed as the coding walk conditioned on ``T_k = n``."""
    sampler = get_sampler(spec)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    steps = sampler.sample_steps(rng, 1)[0]
    return LatticePath.from_increments(steps)


def sample_conditioned_forest(spec: ConditionedForestSpec, seed) -> Forest:
    return forest_from_walk(sample_first_passage_bridge_walk(spec, seed))


def check_first_passage(values, k: int) -> None:
    """Raise unless the walk first reaches ``-k`` at its last index."""
    values = np.asarray(values)
    t = first_passage_index(values, k)
    if t != values.size - 1:
        raise AssertionError(f"walk first hits -{k} at {t}, expected {values.size - 1}")
