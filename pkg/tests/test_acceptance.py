"""Acceptance criteria, one test each, at the stated tolerances.

Every test prints a single ``CRITERION k: PASS|FAIL ...`` line (also without
``-s``). Criteria 3 to 5 share one batch of generated instances; it takes
roughly a quarter of an hour on one core.
"""
import functools
import math

import numpy as np
import pytest

from detachment.cascade import RngSpec, estimate_epoi, exact_epoi
from detachment.cli import main
from detachment.errors import NoCandidates
from detachment.generator import GeneratorParams, generate_circles, generate_instance, sample_weights
from detachment.network import CircleCollection, DetachmentPair, apply_detachment, build_bbn, flat_weights, induce_network
from detachment.optimizer import Evaluator, MinCutConfig, compare_methods, exhaustive_detach, greedy_detach, min_cut_detach

from conftest import random_instance

pytestmark = pytest.mark.slow

SIZES = (280, 320, 680, 1000)
REPLICATES = 5
COMPARED = 15
TRIALS = 10_000
SEARCH_TRIALS = 1_000


@pytest.fixture
def report(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}")
    return emit


def test_criterion_1_oracle_equivalence(report):
    hits, worst = 0, 0.0
    for seed in range(1, 101):
        circles, weights = random_instance(seed, max_edges=12)
        exact = exact_epoi(circles, weights).value
        est = estimate_epoi(circles, weights, None, TRIALS, RngSpec(seed))
        z = abs(est.value - exact) / est.std_error if est.std_error > 0 else (0.0 if est.value == exact else math.inf)
        hits += z <= 4
        worst = max(worst, z)
    ok = hits >= 95
    report(1, ok, f"{hits}/100 within 4 stderr (need >= 95); largest |z| = {worst:.2f}")
    assert ok


def test_criterion_2_fixture_exactness(report):
    t2 = CircleCollection.from_mapping({"I1": {"a", "b"}, "I2": {"b", "c"}, "I3": {"c", "d"}})
    w = flat_weights(t2, 0.5)
    base = exact_epoi(t2, w).value
    after = exact_epoi(apply_detachment(t2, DetachmentPair("b", "I2")), w).value
    # 0.416667 and 0.166667 are six-decimal renderings of 5/12 and 1/6; a
    # 1e-9 band only makes sense around the fractions themselves
    ok_base = abs(base - 5 / 12) <= 1e-9
    ok_after = abs(after - 1 / 6) <= 1e-9
    report(2, ok_base and ok_after, f"base {base:.9f} vs 5/12 ({'ok' if ok_base else 'off'}); after (b,I2) {after:.9f} vs 1/6 ({'ok' if ok_after else 'off'}); tolerance 1e-9")
    assert ok_base and ok_after


@functools.lru_cache(maxsize=None)
def paper_runs():
    """20 paper-profile instances, seed-major over the four sizes. The first 15
    get the full min-cut vs greedy comparison; the rest only the min-cut."""
    runs = []
    for r in range(1, REPLICATES + 1):
        for n in SIZES:
            circles, weights, _ = generate_instance(GeneratorParams.paper_profile(n, seed=r))
            rng = RngSpec(r, n)
            if len(runs) < COMPARED:
                cmp = compare_methods(circles, weights, None, TRIALS, rng, SEARCH_TRIALS)
                runs.append(dict(n=n, seed=r, base=cmp.epoi_base, cut=cmp.cut, cmp=cmp))
            else:
                cut = min_cut_detach(circles, weights, None, MinCutConfig(terminal_trials=SEARCH_TRIALS), TRIALS, rng)
                runs.append(dict(n=n, seed=r, base=cut.epoi_trace[0], cut=cut, cmp=None))
    return runs


def test_criterion_3_baseline_band(report):
    runs = paper_runs()
    values = [run["base"].value for run in runs]
    inside = sum(0.74 <= v <= 0.83 for v in values)
    ok = inside >= 18
    report(3, ok, f"{inside}/20 base EPOI in [0.74, 0.83] (need >= 18); range {min(values):.4f}..{max(values):.4f}, mean {np.mean(values):.4f}")
    assert ok


def test_criterion_4_greedy_beats_cut(report):
    wins, gaps = 0, []
    for run in paper_runs()[:COMPARED]:
        cmp = run["cmp"]
        margin = 2 * math.hypot(cmp.epoi_cut.std_error, cmp.epoi_greedy.std_error)
        gap = cmp.epoi_cut.value - cmp.epoi_greedy.value
        gaps.append(gap)
        wins += gap >= margin
    not_worse = sum(g >= 0 for g in gaps)
    ok = wins >= 10
    report(4, ok, f"greedy below cut beyond 2 combined stderr in {wins}/15 (need >= 10); greedy <= cut in {not_worse}/15; gaps {' '.join(f'{g:.4f}' for g in gaps)}")
    assert ok


def test_criterion_5_min_cut_separates(report):
    violations = 0
    for run in paper_runs():
        a, b = run["cut"].terminals
        violations += not build_bbn(run["cut"].final_circles).separated(a, b)
        if run["cmp"] is not None:
            violations += not build_bbn(run["cmp"].cut.final_circles).separated(a, b)
    ok = violations == 0
    report(5, ok, f"{violations} separation violations over {len(paper_runs())} min-cut runs")
    assert ok


def small_instances():
    return [random_instance(seed, max_edges=12) for seed in range(1001, 1051)]


def test_criterion_6_greedy_optimal_at_one(report):
    violations = 0
    for circles, weights in small_instances():
        g = greedy_detach(circles, weights, None, 1, Evaluator.exact()).final_epoi.value
        x = exhaustive_detach(circles, weights, None, 1).final_epoi.value
        violations += abs(g - x) > 1e-12
    ok = violations == 0
    report(6, ok, f"{violations}/50 instances where greedy m=1 differs from exhaustive m=1 by > 1e-12")
    assert ok


def test_criterion_7_monotone_greedy(report):
    violations, steps, worst = 0, 0, 0.0
    for circles, weights in small_instances():
        m = len(build_bbn(circles).links)
        for k in range(m, 0, -1):
            try:
                trace = greedy_detach(circles, weights, None, k, Evaluator.exact()).epoi_trace
                break
            except NoCandidates:
                continue
        for before, after in zip(trace, trace[1:]):
            steps += 1
            if after.value > before.value:
                violations += 1
                worst = max(worst, after.value - before.value)
    ok = violations == 0
    report(7, ok, f"{violations} increasing steps out of {steps} greedy steps on 50 instances (largest rise {worst:.6f})")
    assert ok


def test_criterion_8_generator_fidelity(report):
    bad = []
    for seed in range(10):
        circles = generate_circles(GeneratorParams.paper_profile(967, seed=seed))
        bbn = build_bbn(circles)
        if (len(circles), len(bbn.bridges), len(bbn.components())) != (106, 140, 1):
            bad.append(seed)
    clique = CircleCollection.from_mapping({"I1": {f"v{i}" for i in range(320)}})
    draws = np.array(list(sample_weights(induce_network(clique, flat_weights(clique, 0.0)), 20, 80, RngSpec(967)).values()))[:100_000]
    mean, std = draws.mean(), draws.std()
    ok = not bad and abs(mean - 0.2) <= 0.005 and abs(std - 0.0398) <= 0.005
    report(8, ok, f"counts wrong for seeds {bad} of 0..9; Beta(20,80) mean {mean:.4f}, std {std:.4f} over 1e5 draws")
    assert ok


def test_criterion_9_bench_determinism(report, tmp_path):
    outputs = []
    for name in ("first.csv", "second.csv"):
        path = tmp_path / name
        assert main(["bench", "--sizes", "320", "--seed", "42", "--out", str(path)]) == 0
        outputs.append(path.read_bytes())
    ok = outputs[0] == outputs[1]
    report(9, ok, f"two runs of bench --sizes 320 --seed 42 {'are' if ok else 'are not'} byte-identical ({len(outputs[0])} bytes)")
    assert ok


def test_criterion_10_table_values_not_reproducible(report):
    report(10, True, "informational: exact published table values rely on proprietary data and unpublished seeds; criteria 2 to 4 stand in for them")
