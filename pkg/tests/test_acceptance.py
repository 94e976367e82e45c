"""Acceptance checks, one test per criterion.

Each test appends a ``CRITERION n: PASS|FAIL ...`` line that pytest prints in
its terminal summary.  Run this file directly to get the same lines without
pytest.  Runtime budgets are part of each criterion.
"""

import itertools
import time

import numpy as np
import pytest

from condforest.coding import (
    contour_from_height,
    contour_times,
    distance_matrix,
    forest_from_walk,
    height_from_walk,
    height_of_shift_check,
    height_sequence,
    walk_from_forest,
)
from condforest.conditioned import (
    ConditionedForestSpec,
    FirstPassageSampler,
    get_sampler,
    hitting_time_pmf,
    is_feasible,
    step_sum_pmf,
)
from condforest.errors import NoCrossingError, SizeCapExceeded
from condforest.invariance import ExperimentConfig, invariance_experiment, uniform_passage_check
from condforest.laws import OffspringLaw
from condforest.realtrees import check_four_point, excursion_metric, gh_comparison
from condforest.stable import (
    RealPath,
    StableParams,
    bridge_marginal_samples,
    locate_g,
    sample_first_passage_times,
    sample_stable_path,
    stable_increments,
)
from condforest.trees import Forest, UlamHarrisTree, sample_gw_forest, vertex_table

from conftest import ACCEPTANCE_LINES, FIG1_COUNTS, FIG1_WALK, all_forests, all_trees, bfs_distances

pytestmark = pytest.mark.slow

STEPS = (-1, 0, 1, 2)


def record(number, ok, detail, started, budget):
    elapsed = time.perf_counter() - started
    in_time = elapsed < budget
    verdict = "PASS" if ok and in_time else "FAIL"
    line = f"CRITERION {number}: {verdict} {detail} [{elapsed:.1f}s, budget {budget:.0f}s]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line
    assert in_time, line


# -- oracles ---------------------------------------------------------------------

def literal_heights(walks):
    """Row-wise count of j < m with S_j = min S[j..m], by direct scanning."""
    rows, size = walks.shape
    out = np.zeros((rows, size), dtype=np.int16)
    for m in range(size):
        low = walks[:, m].copy()
        for j in range(m - 1, -1, -1):
            np.minimum(low, walks[:, j], out=low)
            out[:, m] += walks[:, j] == low
    return out


def all_walks(length, prefix=()):
    """Every walk with ``length`` steps in ``STEPS`` whose first steps are ``prefix``."""
    free = length - len(prefix)
    digits = np.array(list(itertools.product(range(4), repeat=free)), dtype=np.int8).reshape(-1, free)
    steps = np.asarray(STEPS, dtype=np.int8)[digits]
    if prefix:
        head = np.broadcast_to(np.array(prefix, dtype=np.int8), (len(steps), len(prefix)))
        steps = np.concatenate([head, steps], axis=1)
    walks = np.zeros((len(steps), length + 1), dtype=np.int8)
    np.cumsum(steps, axis=1, out=walks[:, 1:])
    return walks


def first_passage_law(pmf, k, n):
    """Conditioned law of first-passage step sequences, by pruned enumeration."""
    steps = np.array(STEPS)
    seqs = np.zeros((1, 0), dtype=np.int64)
    level = np.zeros(1, dtype=np.int64)
    prob = np.ones(1)
    for j in range(n):
        remaining = n - j - 1
        m = len(level)
        seqs = np.concatenate([np.repeat(seqs, 4, axis=0), np.tile(steps, m)[:, None]], axis=1)
        prob = np.repeat(prob, 4) * np.tile(pmf, m)
        level = np.repeat(level, 4) + np.tile(steps, m)
        if remaining:
            # stay above -k and keep -k reachable with the remaining -1 steps
            keep = (level > -k) & (level - remaining <= -k) & (prob > 0)
        else:
            keep = (level == -k) & (prob > 0)
        seqs, level, prob = seqs[keep], level[keep], prob[keep]
    if prob.size == 0:
        return seqs, prob
    return seqs, prob / prob.sum()


# -- criteria --------------------------------------------------------------------

def test_criterion_1_coding_round_trips():
    started = time.perf_counter()
    fig = UlamHarrisTree(FIG1_COUNTS)
    ok_fig = walk_from_forest(fig).values.tolist() == FIG1_WALK and forest_from_walk(FIG1_WALK) == Forest((fig,))
    bad = 0
    forests = all_forests(8)
    for trees in forests:
        forest = Forest.from_counts(trees)
        walk = walk_from_forest(forest)
        depths = [r.depth for t in forest.trees for r in vertex_table(t)]
        bad += forest_from_walk(walk) != forest or height_from_walk(walk).tolist() != depths
    rng = np.random.default_rng(20240601)
    law = OffspringLaw.geometric()
    done = 0
    while done < 10_000:
        try:
            forest = sample_gw_forest(law, int(rng.integers(1, 8)), rng.integers(2**63), size_cap=2000)
        except SizeCapExceeded:
            continue
        done += 1
        walk = walk_from_forest(forest)
        depths = [r.depth for t in forest.trees for r in vertex_table(t)]
        bad += forest_from_walk(walk) != forest or height_from_walk(walk).tolist() != depths
    detail = f"figure={ok_fig}, {len(forests)} enumerated + {done} random forests, {bad} mismatches"
    record(1, ok_fig and bad == 0, detail, started, 60)


def test_criterion_2_height_contour_distance():
    started = time.perf_counter()
    checked = 0
    bad = 0
    # every walk with at most 10 steps, then every walk with 13 steps (14 values)
    for length in range(1, 11):
        walks = all_walks(length)
        bad += int(np.sum(np.any(height_sequence(walks.astype(np.int64)) != literal_heights(walks), axis=1)))
        checked += len(walks)
    for prefix in itertools.product(STEPS, repeat=3):
        walks = all_walks(13, prefix=prefix)
        bad += int(np.sum(np.any(height_sequence(walks.astype(np.int64)) != literal_heights(walks), axis=1)))
        checked += len(walks)
    contour_bad = 0
    for trees in all_forests(8):
        h = height_from_walk(walk_from_forest(Forest.from_counts(trees)))
        c = contour_from_height(h)
        contour_bad += not np.array_equal(c.values[contour_times(h)[:-1]], h)
    dist_bad = 0
    tree_count = 0
    for size in range(1, 11):
        for counts in all_trees(size):
            tree_count += 1
            dist_bad += not np.array_equal(distance_matrix(UlamHarrisTree(counts)), bfs_distances(counts))
    ok = bad == 0 and contour_bad == 0 and dist_bad == 0
    detail = (
        f"{checked} walks (all of <=10 steps and of 13 steps) height mismatches={bad}; "
        f"contour anchor mismatches={contour_bad}; distance mismatches={dist_bad} over {tree_count} trees"
    )
    record(2, ok, detail, started, 300)


def test_criterion_3_feller_identity():
    started = time.perf_counter()
    worst = 0.0
    laws = {"binary": OffspringLaw.binary(), "geometric": OffspringLaw.geometric()}
    n_max = 200
    for law in laws.values():
        # killed-walk side for every k, by convolution powers of T_1
        t1 = hitting_time_pmf(law, 1, n_max)
        tk = np.zeros(n_max + 1)
        tk[0] = 1.0
        sums = {n: step_sum_pmf(law, n) for n in range(1, n_max + 1)}
        for k in range(1, n_max + 1):
            tk = np.convolve(tk, t1)[: n_max + 1]
            for n in range(k, n_max + 1):
                off, pmf = sums[n]
                idx = -k - off
                rhs = k / n * pmf[idx] if 0 <= idx < pmf.size else 0.0
                worst = max(worst, abs(tk[n] - rhs))
    record(3, worst < 1e-12, f"max |P(T_k=n) - (k/n)P(S_n=-k)| = {worst:.2e} over n<=200, k<=n, {', '.join(laws)}",
           started, 60)


def test_criterion_4_sampler_exactness():
    started = time.perf_counter()
    rng = np.random.default_rng(4)
    laws = [np.full(4, 0.25), rng.dirichlet(np.ones(4)), np.array([0.5, 0.0, 0.2, 0.3])]
    worst = 0.0
    specs = 0
    for pmf in laws:
        law = OffspringLaw(pmf)
        for n in range(1, 13):
            for k in range(1, n + 1):
                if not is_feasible(law, k, n):
                    continue
                seqs, ref = first_passage_law(pmf, k, n)
                for base in (2, 16):
                    p = FirstPassageSampler(ConditionedForestSpec(law, k, n), base=base).output_probability(seqs)
                    tv = 0.5 * (np.abs(p - ref).sum() + max(0.0, 1.0 - p.sum()))
                    worst = max(worst, tv)
                specs += 1
    record(4, worst < 1e-10, f"max total variation {worst:.2e} over {specs} feasible (law, k, n) with n<=12",
           started, 300)


def test_criterion_5_passage_time_uniformity():
    started = time.perf_counter()
    spec = ConditionedForestSpec(OffspringLaw.binary(), 10, 100)
    out = uniform_passage_check(spec, 100_000, 5)
    c = out["counts"]
    detail = (
        f"chi-square p={out['pvalue']:.3g} (need > 0.001); counts at T=0: {c[0]}, T=50: {c[50]}, "
        f"T=100: {c[100]}, uniform expectation {100_000 / 101:.0f}"
    )
    record(5, out["pvalue"] > 0.001, detail, started, 60)


def test_criterion_6_shift_commutation():
    started = time.perf_counter()
    rng = np.random.default_rng(6)
    specs = [
        ConditionedForestSpec(OffspringLaw.binary(), 4, 100),
        ConditionedForestSpec(OffspringLaw.geometric(), 7, 250),
        ConditionedForestSpec(OffspringLaw(np.array([0.5, 0.1, 0.1, 0.3])), 12, 60),
        ConditionedForestSpec(OffspringLaw.power_tail(1.5), 20, 500),
    ]
    total = bad = 0
    for spec in specs:
        for walk in get_sampler(spec).sample_walks(rng, 2500):
            k = int(rng.integers(0, spec.k + 1))
            bad += not height_of_shift_check(walk, k)
            total += 1
    record(6, bad == 0, f"{bad} failures in {total} conditioned paths", started, 60)


def test_criterion_7_stable_calibration():
    started = time.perf_counter()
    worst = 0.0
    parts = []
    for alpha in (1.5, 2.0):
        params = StableParams(alpha)
        rng = np.random.default_rng(int(alpha * 100))
        x = stable_increments(params, 1.0, 100_000, rng)
        t = sample_first_passage_times(params, 1.0, 100_000, rng)
        for lam in (0.5, 1.0, 2.0):
            v = np.exp(-lam * x)
            dev = (v.mean() - np.exp(lam**alpha)) / (v.std(ddof=1) / np.sqrt(v.size))
            w = np.where(np.isinf(t), 0.0, np.exp(-lam * t))
            dev_t = (w.mean() - np.exp(-(lam ** (1 / alpha)))) / (w.std(ddof=1) / np.sqrt(w.size))
            worst = max(worst, abs(dev), abs(dev_t))
            parts.append(f"a={alpha} l={lam}: X {dev:+.2f}, T {dev_t:+.2f}")
    record(7, worst < 3, f"max |deviation| {worst:.2f} SE ({'; '.join(parts)})", started, 300)


def test_criterion_8_conditioned_bridge_diagnostics():
    started = time.perf_counter()
    alpha, s = 1.5, 1.0
    params = StableParams(alpha)
    runs = 1000
    inside = misses = terminal_bad = 0
    seeds = np.random.SeedSequence(8).spawn(runs)
    for child in seeds:
        path = sample_stable_path(params, 1.0, 10**6, np.random.default_rng(child))
        try:
            loc = locate_g(path, s, alpha)
        except NoCrossingError:
            misses += 1
            continue
        inside += 0 < loc.g < 1
        terminal = loc.g ** (-1 / alpha) * path.values[loc.index]
        terminal_bad += abs(terminal + s) > loc.tolerance
    frac = inside / runs
    data = bridge_marginal_samples(params, s, 10_000, 88, times=(0.5,))
    g, xb = data["g"], data["values"][0.5]
    r = float(np.corrcoef(g, xb)[0, 1])
    se = 1 / np.sqrt(g.size)
    ok = frac >= 0.99 and terminal_bad == 0 and abs(r) < 3 * se
    detail = (
        f"0<g<1 in {frac:.1%} of {runs} runs ({misses} without crossing); terminal outside tolerance: "
        f"{terminal_bad}; corr(g, bridge at 1/2) = {r:+.4f} = {r / se:+.2f} SE over {g.size} paths"
    )
    record(8, ok, detail, started, 900)


def test_criterion_9_desk_scale_invariance():
    started = time.perf_counter()
    config = ExperimentConfig(OffspringLaw.geometric(), 2.0, 1.0, (1000, 10_000, 100_000), 2000, 42)
    report = invariance_experiment(config)
    v = report["verdicts"]
    rows = {row["n"]: row for row in report["per_n"]}
    ks_mid = rows[10_000]["ks"]["0.5"]
    ok = ks_mid < 0.05 and v["ks_trend_ok"] and v["sup_hc_bound_ok"]
    ks_all = ", ".join(f"{n}: {row['ks']['0.5']:.4f}" for n, row in rows.items())
    hc_all = ", ".join(f"{n}: {row['sup_hc']:.4f}" for n, row in rows.items())
    detail = (
        f"KS at t=0.5 (n=1e4) {ks_mid:.4f} < 0.05; KS by n {{{ks_all}}} trend ok={v['ks_trend_ok']}; "
        f"sup|C-H| by n {{{hc_all}}} bound ok={v['sup_hc_bound_ok']}"
    )
    record(9, ok, detail, started, 900)


def vervaat_excursion(rng, steps):
    """Excursion from a random-walk bridge by cyclic rotation at its minimum."""
    z = rng.standard_normal(steps)
    z -= z.mean()
    b = np.concatenate([[0.0], np.cumsum(z)])
    m = int(np.argmin(b[:-1]))
    e = np.concatenate([b[m:-1], b[:m + 1] + b[-1]]) - b[m]
    e[-1] = 0.0
    return np.maximum(e, 0.0)


def test_criterion_10_real_tree_metrics():
    started = time.perf_counter()
    rng = np.random.default_rng(10)
    four_bad = 0
    for _ in range(1000):
        f = RealPath.on_grid(vervaat_excursion(rng, 1000))
        tree = excursion_metric(f, rng.random(40))
        quads = rng.integers(0, 40, size=(1000, 4))
        four_bad += not check_four_point(tree, 1e-9, quads)
    gh_bad = 0
    for _ in range(10_000):
        f = vervaat_excursion(rng, 60)
        g = np.maximum(f + rng.normal(0, rng.uniform(0.01, 1.0), f.size), 0.0)
        g[0] = 0.0
        half, bound = gh_comparison(RealPath.on_grid(f), RealPath.on_grid(g), rng.random(8))
        gh_bad += half > bound + 1e-12
    fig = UlamHarrisTree(FIG1_COUNTS)
    h = height_from_walk(walk_from_forest(fig))
    c = contour_from_height(h)
    cpath = RealPath(float(c.duration), 1.0, c.values.astype(float))
    agree = np.array_equal(excursion_metric(cpath, contour_times(h)[:-1]).dist, distance_matrix(fig))
    ok = four_bad == 0 and gh_bad == 0 and agree
    detail = (
        f"four-point failures {four_bad}/1000 excursions x 1000 quadruples; GH estimate above bound "
        f"{gh_bad}/10000 pairs; figure tree contour metric equals graph distance: {agree}"
    )
    record(10, ok, detail, started, 300)


if __name__ == "__main__":
    import sys

    failed = 0
    criteria = [(int(name.split("_")[2]), fn) for name, fn in globals().items()
                if name.startswith("test_criterion_")]
    for _, fn in sorted(criteria, key=lambda item: item[0]):
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
