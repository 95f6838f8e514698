"""Acceptance criteria, one check per criterion.

Run ``pytest -m acceptance`` (lines appear in the terminal summary) or
``python tests/test_acceptance.py`` for a plain listing.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

import oracles  # noqa: E402
from gibbs_bounds import cli  # noqa: E402
from gibbs_bounds.bounds import (  # noqa: E402
    BoundContext,
    EnsembleSpec,
    Schedule,
    analytic_coefficients,
    ensemble_nearly_uniform_epsilon,
    ensemble_nearly_uniform_epsilon_observed,
    ensemble_uniform_epsilon,
    epsilon_hat,
    epsilon_star,
    epsilon_star_analytic_bound,
    extend_full_classifier_bound,
    nearly_uniform_epsilon,
    telescoping_epsilon,
    uniform_epsilon,
)
from gibbs_bounds.knn import (  # noqa: E402
    LabeledDataset,
    brute_force_average_holdout_error,
    gibbs_average_holdout_error,
    nearest_neighbor_disagreement_bound,
    per_example_misclassification_probability,
)
from gibbs_bounds.simulate import BoundSpec, SyntheticWorld, run_coverage_experiment  # noqa: E402
from gibbs_bounds.telescope import OptimizerGrid, brute_force_optimize, optimize_schedule  # noqa: E402

pytestmark = pytest.mark.acceptance

RESULTS = {}


def rel_close(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(abs(a), abs(b), 1e-300)


def log_uniform_int(rng, low, high):
    return int(round(math.exp(rng.uniform(math.log(low), math.log(high)))))


def criterion_1():
    k, additive = analytic_coefficients(3.0)
    k_ref = float(oracles.mp.e ** 3 / (oracles.mp.e ** 3 - 1))
    add_ref = float(oracles.sqrt(4) * (oracles.mp.e ** 3 / (oracles.mp.e ** 3 - 1)) ** 2 + 1)
    ok = (
        abs(k - k_ref) <= 1e-6
        and abs(additive - add_ref) <= 1e-6
        and round(additive, 2) == 3.22
        and k <= 1.06
    )
    return ok, f"K={k:.9f} additive={additive:.9f} (rounds to {round(additive, 2)})"


def criterion_2():
    rng = np.random.default_rng(20240502)
    bad = 0
    for _ in range(500):
        m = log_uniform_int(rng, 10, 10**6)
        s = max(1, min(m, log_uniform_int(rng, 1, m)))
        n = log_uniform_int(rng, 10, 10**6)
        delta = rng.uniform(0.001, 0.2)
        c = rng.uniform(0.5, 5.0)
        ctx, ens = BoundContext(m, n, delta), EnsembleSpec(s)
        star = epsilon_star(ctx, ens, c).epsilon_raw
        env = epsilon_star_analytic_bound(ctx, ens, c).epsilon_raw
        bad += not star <= env
    return bad == 0, f"{bad} violations in 500 points"


def criterion_3():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(200):
        m = log_uniform_int(rng, 2, 10**6)
        s = int(rng.integers(1, min(m, 1000) + 1))
        n = log_uniform_int(rng, 1, 10**6)
        delta = rng.uniform(1e-4, 0.5)
        ctx, ens = BoundContext(m, n, delta), EnsembleSpec(s)
        base = epsilon_hat(ctx, 0, delta)
        j = int(rng.integers(1, s + 1))
        observed = EnsembleSpec(s, (0.0,) * s)
        pairs = [
            (nearly_uniform_epsilon(ctx, 1).epsilon_raw, uniform_epsilon(ctx).epsilon_raw),
            (ensemble_nearly_uniform_epsilon(ctx, ens, 0).epsilon_raw, base),
            (telescoping_epsilon(ctx, ens, Schedule((0,), (delta, 0.0))).epsilon_raw, base),
            (
                ensemble_nearly_uniform_epsilon_observed(ctx, observed, j).epsilon_raw,
                ensemble_nearly_uniform_epsilon(ctx, ens, j).epsilon_raw,
            ),
        ]
        for a, b in pairs:
            worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
    return worst <= 1e-12, f"max relative difference {worst:.3g} over 200 inputs x 4 chains"


def criterion_4():
    rng = np.random.default_rng(11)
    configs = 0
    failures = []
    while configs < 60:
        t = int(rng.integers(1, 3))
        s = int(rng.integers(1, 11))
        m = int(rng.integers(s, 5000))
        n = int(rng.integers(5, 3000))
        units = int(rng.integers(1, 21))
        inc = float(rng.choice([0.0025, 0.005, 0.01]))
        ctx, ens = BoundContext(m, n, units * inc), EnsembleSpec(s)
        count = int(rng.integers(1, min(11, s + 1) + 1))
        cands = tuple(sorted(rng.choice(s + 1, size=count, replace=False).tolist()))
        if t * cands[0] > s:
            continue  # no feasible schedule on this grid
        grid = OptimizerGrid(t, inc, cands)
        sched, dp = optimize_schedule(ctx, ens, grid)
        _, bf = brute_force_optimize(ctx, ens, grid)
        achieved = telescoping_epsilon(ctx, ens, sched).epsilon_raw
        if dp.epsilon_raw != bf.epsilon_raw or achieved != dp.epsilon_raw:
            failures.append((m, n, s, t, units, inc, cands))
        configs += 1
    return not failures, f"{configs} configurations, {len(failures)} mismatches"


def criterion_5():
    rng = np.random.default_rng(5)
    worst = 0.0
    cases = 0
    while cases < 150:
        total = int(rng.integers(2, 13))
        n = int(rng.integers(1, total))
        k = int(rng.choice([1, 3, 5]))
        if k > total - n:
            continue
        X = rng.integers(0, 4, size=(total, int(rng.integers(1, 3))))
        y = rng.integers(0, 2, size=total)
        data = LabeledDataset(X, y, n)
        worst = max(
            worst,
            abs(gibbs_average_holdout_error(data, k) - brute_force_average_holdout_error(data, k)),
        )
        cases += 1
    worked = LabeledDataset([[0.0], [1.0], [3.0]], ["a", "b", "a"], 2)
    half = per_example_misclassification_probability(worked, 0, 1)
    ok = worst <= 1e-12 and half == 0.5
    return ok, f"{cases} datasets, max |DP - enumeration| = {worst:.3g}; worked example {half}"


def criterion_6():
    world = SyntheticWorld.uniform(200, 500, 0.0, 0.5, seed=2024)
    specs = [BoundSpec.parse(text) for text in cli.DEFAULT_SIM_BOUNDS]
    start = time.perf_counter()
    report = run_coverage_experiment(world, 20, "lowest_s", specs, 10_000, delta=0.05)
    elapsed = time.perf_counter() - start
    freqs = ", ".join(f"{e.label}={e.frequency:.4f}" for e in report.entries)
    return not report.failures, f"{freqs} ({elapsed:.1f} s)"


def criterion_7():
    import contextlib
    import csv
    import io

    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = cli.main(
            ["sweep", "--m", "1000,10000,100000,1000000", "--ratio", "100", "--n", "500",
             "--delta", "0.05", "--format", "csv"]
        )
    rows = list(csv.DictReader(io.StringIO(buf.getvalue())))
    values = [float(r["epsilon"]) for r in rows]
    flat = code == 0 and len(values) == 4 and max(values) - min(values) <= 1e-12
    ctx = BoundContext(1000, 500, 0.05)
    by_s = [epsilon_star_analytic_bound(ctx, EnsembleSpec(s), 3.0).epsilon for s in range(1000, 0, -1)]
    # as s decreases the envelope must not shrink
    monotone = all(b >= a for a, b in zip(by_s, by_s[1:]))
    return flat and monotone, f"spread {max(values) - min(values):.3g}; monotone in s: {monotone}"


def criterion_8():
    total, folds = 1000, 10
    disagreement = nearest_neighbor_disagreement_bound(total, total // folds, k=1)
    gibbs = ensemble_uniform_epsilon(BoundContext(folds, total // folds, 0.05), EnsembleSpec(folds))
    full = extend_full_classifier_bound(gibbs, 0.10)
    ok = full.epsilon_raw == gibbs.epsilon + 0.10 and disagreement == 0.1
    return ok, f"gibbs {gibbs.epsilon:.6f} -> full {full.epsilon_raw:.6f}; 1-NN disagreement {disagreement}"


CRITERIA = {
    1: ("coefficients at c=3", criterion_1),
    2: ("analytic envelope dominates epsilon*", criterion_2),
    3: ("reduction identities", criterion_3),
    4: ("DP equals exhaustive search", criterion_4),
    5: ("k-NN DP equals split enumeration", criterion_5),
    6: ("coverage soundness", criterion_6),
    7: ("selectivity price sweep", criterion_7),
    8: ("full classifier extension", criterion_8),
}


def run_criterion(number):
    name, fn = CRITERIA[number]
    ok, detail = fn()
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number} ({name}): {detail}"
    RESULTS[number] = line
    return ok, line


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    ok, line = run_criterion(number)
    print(line)
    assert ok, line


if __name__ == "__main__":
    status = 0
    for number in sorted(CRITERIA):
        ok, line = run_criterion(number)
        print(line, flush=True)
        status |= not ok
    sys.exit(status)
