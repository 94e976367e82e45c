"""Quick self-checks run by ``condforest verify``.

Each suite returns ``(passed, detail)``.  They are scaled down versions of
the checks in the test suite so that a full run takes well under a minute.
"""

from __future__ import annotations

import itertools

import numpy as np

from .coding import (
    contour_from_height,
    contour_times,
    distance_matrix,
    forest_from_walk,
    height_literal,
    height_of_shift_check,
    height_sequence,
    walk_from_forest,
)
from .conditioned import (
    ConditionedForestSpec,
    FirstPassageSampler,
    get_sampler,
    hitting_time_pmf,
    is_feasible,
    walk_hitting_pmf,
)
from .invariance import cyclic_exchangeability_check, uniform_passage_check
from .laws import OffspringLaw
from .realtrees import check_four_point, excursion_metric
from .stable import RealPath, StableParams, stable_increments
from .trees import UlamHarrisTree


def _coding(seed):
    rng = np.random.default_rng(seed)
    checked = 0
    for length in range(1, 11):
        for steps in itertools.product((-1, 0, 1, 2), repeat=length):
            if length > 7 and rng.random() > 0.02:
                continue
            values = np.concatenate([[0], np.cumsum(steps)])
            if not np.array_equal(height_sequence(values), height_literal(values)):
                return False, f"height mismatch on {values.tolist()}"
            if values[-1] < 0 and np.all(values[:-1] > values[-1]):
                forest = forest_from_walk(values)
                if not np.array_equal(walk_from_forest(forest).values, values):
                    return False, f"round trip failed on {values.tolist()}"
                h = height_sequence(values)[:-1]
                c = contour_from_height(h)
                if not np.array_equal(c.values[contour_times(h)[:-1]], h):
                    return False, f"contour anchors failed on {values.tolist()}"
            checked += 1
    return True, f"{checked} paths"


def _feller(seed):
    worst = 0.0
    for law in (OffspringLaw.binary(), OffspringLaw.geometric()):
        for k in (1, 2, 5, 17):
            ref = hitting_time_pmf(law, k, 120)
            for n in range(k, 121):
                worst = max(worst, abs(ref[n] - walk_hitting_pmf(law, k, n)))
    return worst < 1e-12, f"max abs difference {worst:.2e}"


def _enumerate(q, k, n):
    steps = np.arange(-1, q.size - 1)
    out = {}
    for seq in itertools.product(range(q.size), repeat=n):
        walk = np.cumsum(steps[list(seq)])
        if walk[-1] == -k and np.all(walk[:-1] > -k):
            p = float(np.prod(q[list(seq)]))
            if p > 0:
                out[tuple(steps[list(seq)])] = p
    total = sum(out.values())
    return {key: p / total for key, p in out.items()}


def _sampler(seed):
    rng = np.random.default_rng(seed)
    law = OffspringLaw(rng.dirichlet(np.ones(4)))
    worst = 0.0
    for n in range(1, 8):
        for k in range(1, n + 1):
            if not is_feasible(law, k, n):
                continue
            ref = _enumerate(law.pmf, k, n)
            keys = list(ref)
            p = FirstPassageSampler(ConditionedForestSpec(law, k, n), base=2).output_probability(
                np.array(keys)
            )
            tv = 0.5 * (np.abs(p - np.array([ref[x] for x in keys])).sum() + max(0.0, 1 - p.sum()))
            worst = max(worst, tv)
    return worst < 1e-10, f"max total variation {worst:.2e}"


def _commutation(seed):
    spec = ConditionedForestSpec(OffspringLaw.geometric(), 5, 60)
    rng = np.random.default_rng(seed)
    walks = get_sampler(spec).sample_walks(rng, 500)
    ks = rng.integers(0, spec.k + 1, size=len(walks))
    bad = sum(not height_of_shift_check(w, int(k)) for w, k in zip(walks, ks))
    return bad == 0, f"{bad} failures in {len(walks)} paths"


def _exchangeability(seed):
    spec = ConditionedForestSpec(OffspringLaw.binary(), 6, 80)
    pvals = cyclic_exchangeability_check(spec, 3000, seed)
    low = min(pvals.values())
    return low > 0.001, f"smallest KS p-value {low:.3g}"


def _uniformity(seed):
    spec = ConditionedForestSpec(OffspringLaw.binary(), 10, 100)
    p = uniform_passage_check(spec, 100_000, seed)["pvalue"]
    return p > 0.001, f"chi-square p-value {p:.3g}"


def _stable(seed):
    details = []
    ok = True
    rng = np.random.default_rng(seed)
    for alpha in (1.5, 2.0):
        z = stable_increments(StableParams(alpha), 1.0, 100_000, rng)
        for lam in (0.5, 1.0):
            v = np.exp(-lam * z)
            dev = (v.mean() - np.exp(lam**alpha)) / (v.std() / np.sqrt(v.size))
            ok &= abs(dev) < 3
            details.append(f"alpha={alpha} lambda={lam}: {dev:+.2f} SE")
    return bool(ok), "; ".join(details)


def _realtrees(seed):
    rng = np.random.default_rng(seed)
    tree = UlamHarrisTree((3, 2, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0))
    h = height_sequence(walk_from_forest(tree).values)[:-1]
    c = contour_from_height(h)
    cpath = RealPath(float(c.duration), 1.0, c.values.astype(float))
    agree = np.array_equal(excursion_metric(cpath, contour_times(h)[:-1]).dist, distance_matrix(tree))
    four = True
    for _ in range(20):
        f = np.abs(np.cumsum(rng.standard_normal(200)))
        f[0] = 0
        tree_f = excursion_metric(RealPath.on_grid(f), rng.random(12))
        four &= check_four_point(tree_f)
    return bool(agree and four), f"figure tree agreement={agree}, four-point={bool(four)}"


SUITES = {
    "coding": _coding,
    "feller": _feller,
    "sampler": _sampler,
    "commutation": _commutation,
    "exchangeability": _exchangeability,
    "stable": _stable,
    "realtrees": _realtrees,
    "passage-uniformity": _uniformity,
}
# the uniformity claim for passage times is known not to hold; run it by name
DEFAULT_SUITES = tuple(name for name in SUITES if name != "passage-uniformity")


def run_suites(names, seed) -> list[dict]:
    out = []
    for name in names:
        passed, detail = SUITES[name](seed)
        out.append({"name": name, "passed": bool(passed), "detail": detail})
    return out
