"""Acceptance checks 1-7, one pass/fail line each.

Run with pytest (lines appear in the terminal summary) or directly:
``python tests/test_acceptance.py``.
"""
import math
import random
import sys
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from blockgen import StepConfig, VirtualMachine, bundled_program, run_test  # noqa: E402
from blockgen.cfg import build_super_cfg, control_dependencies  # noqa: E402
from blockgen.encoding import decode, decode_and_run  # noqa: E402
from blockgen.fitness import logical_and, relational_distances  # noqa: E402
from blockgen.harness import a12, compare_campaigns, random_campaign  # noqa: E402
from blockgen.search import SearchConfig, fast_non_dominated_sort, generate_suite  # noqa: E402
from builders import B, build, hat, script, sprite  # noqa: E402

RUNS = 30
BUDGET_MS = 60000
THRESHOLDS = {"pingpong": 0.7, "fruit": 0.9, "green": 0.9}
GOLDEN = Path(__file__).parent / "golden" / "fig1.dot"

RESULTS: dict[int, str] = {}


def report(n, ok, detail):
    RESULTS[n] = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    return ok


@lru_cache(maxsize=None)
def experiment(name):
    program = bundled_program(name)
    targets = set(program.block_ids())
    search, full = [], 0
    for seed in range(RUNS):
        config = SearchConfig(population_size=10, crossover_probability=0.8, initial_length=2,
                              max_wall_ms=BUDGET_MS, seed=seed)
        suite, log = generate_suite(program, config, StepConfig(acceleration=5))
        search.append(log)
        full += targets <= set(suite.covered)
    rand = [random_campaign(program, StepConfig(), BUDGET_MS, seed=seed) for seed in range(RUNS)]
    return search, rand, full


def check_1():
    parts, ok = [], True
    for name, threshold in THRESHOLDS.items():
        search, rand, _ = experiment(name)
        stats = compare_campaigns(search, rand)
        good = stats.a12 >= threshold and stats.p_value < 0.05 and stats.mean_a >= stats.mean_b
        ok &= good
        parts.append(f"{name} A12={stats.a12:.3f} (>= {threshold}) p={stats.p_value:.2g}")
    return report(1, ok, "; ".join(parts))


def check_2():
    parts, ok = [], True
    for name in THRESHOLDS:
        full = experiment(name)[2]
        ok &= full >= 0.8 * RUNS
        parts.append(f"{name} {full}/{RUNS} full")
    return report(2, ok, "; ".join(parts))


def check_3():
    events = [str(e) for e in decode([4, 3, 5, 2, 2, 1, 4, 6, 3, 8], bundled_program("fig1"))]
    ok = events[:3] == ["ClickSprite bear", "Wait 2 s", "ClickSprite cat"] and events[-1] == "ClickSprite bear"
    return report(3, ok, ", ".join(events[:3]) + " ... " + events[-1])


def check_4():
    far = relational_distances(">", -75, 90)[1]
    near = relational_distances(">", -75, -90)[1]
    flower = logical_and((False, 114.0, 0.0), relational_distances("<", -129, -150))[1]
    ok = far == 166 and near == 0 and flower == 136
    return report(4, ok, f"{far:g}, {near:g}, {flower:g}")


def check_5():
    bad = []
    for seconds in (Fraction(1, 10), 1, 2, 7):
        for k in (1, 5, 10):
            p = build([sprite("a", [script(hat("greenFlag"), B("show", "t0"), B("wait", duration=float(seconds)),
                                           B("hide", "t1"))])])
            vm = VirtualMachine(p, StepConfig(acceleration=k), 0)
            vm.start()
            expected = math.ceil(Fraction(seconds) * 1000 / k / Fraction(100, 3))
            for _ in range(expected + 1):
                vm.step()
            got = [i for i, s in enumerate(vm.trace.steps) if "t1" in s.executed]
            if got != [expected]:
                bad.append((float(seconds), k, got, expected))
    return report(5, not bad, "12 (d, k) pairs exact" if not bad else f"mismatches {bad}")


def check_6():
    cfg = build_super_cfg(bundled_program("fig1"))
    cdg = control_dependencies(cfg)
    events = len(cfg.event_nodes)
    depends = cdg.parents["cat_say"] == [("cat_if", "true")]
    golden = cfg.to_dot() == GOLDEN.read_text()
    ok = events == 3 and depends and golden
    return report(6, ok, f"{events} event nodes, say depends on (=10, true): {depends}, golden dot: {golden}")


def _brute_fronts(vectors):
    remaining, fronts = set(range(len(vectors))), []
    while remaining:
        front = sorted(i for i in remaining if not any(
            all(a <= b for a, b in zip(vectors[j], vectors[i])) and vectors[j] != vectors[i]
            for j in remaining if j != i))
        fronts.append(front)
        remaining -= set(front)
    return fronts


def check_7():
    failures = []
    rng = random.Random(7)
    for _ in range(1000):
        n, m = rng.randint(1, 8), rng.randint(1, 4)
        vectors = [[rng.choice([0.0, 0.5, 1.0, 1.5]) for _ in range(m)] for _ in range(n)]
        if [sorted(f) for f in fast_non_dominated_sort(vectors)] != _brute_fronts(vectors):
            failures.append("sorting")
            break

    sizes = []
    generate_suite(bundled_program("green"), SearchConfig(seed=3, max_generations=20),
                   on_generation=lambda g, archive: sizes.append(len(archive.entries)))
    if sizes != sorted(sizes):
        failures.append("archive")

    p = bundled_program("pingpong")
    codons = [rng.randint(0, 480) for _ in range(12)]
    config = StepConfig(acceleration=5)
    e1, t1 = decode_and_run(codons, p, config, 1)
    e2, t2 = decode_and_run(codons, p, config, 1)
    r1, r2 = run_test(p, config, 1, e1), run_test(p, config, 1, e1)
    s1 = generate_suite(p, SearchConfig(seed=1, max_evaluations=100))
    s2 = generate_suite(p, SearchConfig(seed=1, max_evaluations=100))
    if e1 != e2 or t1.to_jsonl() != t2.to_jsonl() or r1.to_jsonl() != r2.to_jsonl() \
            or s1[0].dumps() != s2[0].dumps() or s1[1].to_csv() != s2[1].to_csv():
        failures.append("determinism")

    for name in ("pingpong", "fruit", "green"):
        for _ in range(20):
            _, trace = decode_and_run([rng.randint(0, 480) for _ in range(8)], bundled_program(name), config, 0)
            if any(min(v) != 0 for v in trace.branches.values()):
                failures.append(f"branch records ({name})")
                break

    for _ in range(200):
        a = [rng.randint(0, 4) for _ in range(rng.randint(1, 10))]
        b = [rng.randint(0, 4) for _ in range(rng.randint(1, 10))]
        if abs(a12(a, b) + a12(b, a) - 1.0) > 1e-12:
            failures.append("A12 symmetry")
            break
    if a12([3, 4, 5], [1, 2]) != 1.0:
        failures.append("A12 pairs")
    return report(7, not failures, "all property suites hold" if not failures else "failed: " + ", ".join(failures))


CHECKS = [check_1, check_2, check_3, check_4, check_5, check_6, check_7]


@pytest.mark.parametrize("check", CHECKS, ids=[f"criterion_{i}" for i in range(1, 8)])
def test_acceptance(check):
    ok = check()
    print(RESULTS[CHECKS.index(check) + 1])
    assert ok, RESULTS[CHECKS.index(check) + 1]


if __name__ == "__main__":
    status = 0
    for check in CHECKS:
        if not check():
            status = 1
        print(RESULTS[CHECKS.index(check) + 1], flush=True)
    sys.exit(status)
