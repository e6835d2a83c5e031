import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from blockgen import StepConfig, bundled_program, run_test
from blockgen.encoding import CODON_MAX
from blockgen.search import (Archive, CampaignLog, Individual, SearchConfig, TestSuite, crossover,
                             crowding_distance, dominates, fast_non_dominated_sort, generate_suite, mutate,
                             preference_sort, random_chromosome, rank_probabilities, rank_select,
                             select_survivors)


def ind(fitness, length=1):
    return Individual([0] * length, [None] * length, list(fitness), frozenset())


# --- chromosomes and operators -------------------------------------------------


def test_initial_lengths():
    config = SearchConfig(initial_length=2)
    rng = random.Random(1)
    lengths = Counter(len(random_chromosome(config, rng)) for _ in range(2000))
    assert set(lengths) == {1, 2}


def test_random_chromosome_reproducible():
    config = SearchConfig()
    assert random_chromosome(config, random.Random(5)) == random_chromosome(config, random.Random(5))


def test_codons_uniform():
    rng = random.Random(0)
    counts = Counter()
    config = SearchConfig(initial_length=1)
    for _ in range(10_000):
        counts.update(random_chromosome(config, rng))
    observed = [counts[c] for c in range(CODON_MAX + 1)]
    assert stats.chisquare(observed).pvalue > 0.001


def test_single_codon_never_deleted():
    config = SearchConfig(operator_probability=1.0)
    rng = random.Random(3)
    for _ in range(2000):
        assert len(mutate([7], config, rng)) >= 1


def test_mutation_keeps_length_on_average():
    config = SearchConfig()
    rng = random.Random(11)
    diffs = [len(mutate(list(range(20)), config, rng)) - 20 for _ in range(10_000)]
    assert abs(sum(diffs) / len(diffs)) < 0.05


def test_no_operator_means_identity():
    config = SearchConfig(operator_probability=0.0)
    assert mutate([1, 2, 3], config, random.Random(0)) == [1, 2, 3]


@settings(max_examples=200)
@given(st.lists(st.integers(0, CODON_MAX), min_size=1, max_size=60), st.integers(0, 2**31))
def test_mutation_bounds(codons, seed):
    config = SearchConfig(max_length=50)
    out = mutate(codons, config, random.Random(seed))
    assert 1 <= len(out) <= 50
    assert all(0 <= c <= CODON_MAX for c in out)


def test_crossover_example():
    assert crossover([1, 2, 3, 4], [5, 6], 0.5) == ([1, 2, 6], [5, 3, 4])


def test_crossover_rho_zero_swaps():
    assert crossover([1, 2, 3], [4, 5], 0.0) == ([4, 5], [1, 2, 3])


@settings(max_examples=200)
@given(st.lists(st.integers(0, 9), min_size=1, max_size=12), st.lists(st.integers(0, 9), min_size=1, max_size=12),
       st.floats(0, 1, exclude_max=True))
def test_crossover_conserves_codons(a, b, rho):
    ca, cb = crossover(a, b, rho)
    assert len(ca) + len(cb) == len(a) + len(b)
    assert ca and cb
    assert Counter(ca) + Counter(cb) == Counter(a) + Counter(b)


def test_rank_probabilities_decrease():
    probs = rank_probabilities(10, 1.7)
    assert sum(probs) == pytest.approx(1.0)
    assert all(a > b for a, b in zip(probs, probs[1:]))


def test_rank_one_picked_most():
    rng = random.Random(2)
    population = list(range(10))
    counts = Counter(rank_select(population, 1.7, rng) for _ in range(50_000))
    for k in range(1, 10):
        assert counts[0] > counts[k]
    # the sampler follows the linear-ranking probabilities
    probs = rank_probabilities(10, 1.7)
    for k in range(10):
        assert counts[k] / 50_000 == pytest.approx(probs[k], abs=0.01)


# --- sorting -------------------------------------------------------------------


def brute_fronts(vectors):
    # peel off the non-dominated set over and over
    remaining = set(range(len(vectors)))
    fronts = []
    while remaining:
        front = sorted(i for i in remaining
                       if not any(all(vectors[j][k] <= vectors[i][k] for k in range(len(vectors[i])))
                                  and any(vectors[j][k] < vectors[i][k] for k in range(len(vectors[i])))
                                  for j in remaining if j != i))
        fronts.append(front)
        remaining -= set(front)
    return fronts


def test_hand_made_fronts():
    vectors = [[0.1, 0.9], [0.5, 0.5], [0.6, 0.6], [0.9, 0.95]]
    assert [sorted(f) for f in fast_non_dominated_sort(vectors)] == brute_fronts(vectors) == [[0, 1], [2], [3]]


def test_sorting_matches_brute_force_1000_trials():
    rng = random.Random(1234)
    for _ in range(1000):
        n, m = rng.randint(1, 8), rng.randint(1, 4)
        vectors = [[rng.choice([0.0, 0.25, 0.5, 0.75, 1.0]) for _ in range(m)] for _ in range(n)]
        assert [sorted(f) for f in fast_non_dominated_sort(vectors)] == brute_fronts(vectors)


@settings(max_examples=300)
@given(st.integers(1, 4).flatmap(lambda m: st.lists(st.lists(st.floats(0, 3), min_size=m, max_size=m),
                                                    min_size=1, max_size=8)))
def test_sorting_matches_brute_force_property(vectors):
    assert [sorted(f) for f in fast_non_dominated_sort(vectors)] == brute_fronts(vectors)


def test_dominance():
    assert dominates([0, 1], [1, 1])
    assert not dominates([1, 1], [1, 1])
    assert not dominates([0, 2], [1, 1])


def test_crowding_prefers_extremes():
    dist = crowding_distance([[0.0, 1.0], [0.5, 0.5], [1.0, 0.0], [0.4, 0.6]])
    assert dist[0] == dist[2] == float("inf")
    assert dist[1] > 0 and dist[3] > 0


def test_preference_front_holds_best_per_objective():
    a, b, c, d = ind([0.6, 0.9], 5), ind([0.1, 0.8], 3), ind([0.9, 0.2]), ind([0.5, 0.5])
    fronts = preference_sort([a, b, c, d], [0, 1])
    assert fronts[0] == [b, c]
    assert fronts[1] == [d]
    assert fronts[2] == [a]


def test_preference_ties_go_to_shorter():
    long_, short = ind([0.3], 6), ind([0.3], 2)
    assert preference_sort([long_, short], [0])[0] == [short]


def test_survivors_truncate_by_crowding():
    front = [ind([0.0, 1.0]), ind([0.5, 0.5]), ind([0.52, 0.48]), ind([1.0, 0.0])]
    survivors = select_survivors([front], [0, 1], 3)
    assert front[0] in survivors and front[3] in survivors
    assert len(survivors) == 3


# --- archive -------------------------------------------------------------------


def test_archive_keeps_shorter():
    archive = Archive(["t"])
    eight, five, six = ind([0.0], 8), ind([0.0], 5), ind([0.0], 6)
    archive.update(eight)
    assert archive.entries["t"] is eight
    archive.update(five)
    assert archive.entries["t"] is five
    archive.update(six)
    assert archive.entries["t"] is five
    assert archive.uncovered_indices() == []


def test_archive_ignores_uncovered():
    archive = Archive(["a", "b"])
    archive.update(ind([0.0, 0.4]))
    assert archive.covered == {"a"}
    assert archive.uncovered_indices() == [1]


# --- whole search --------------------------------------------------------------


def test_fig1_full_coverage():
    p = bundled_program("fig1")
    suite, log = generate_suite(p, SearchConfig(seed=0, max_wall_ms=None, max_evaluations=5000))
    assert "cat_say" in suite.covered
    assert set(suite.covered) >= set(p.block_ids())
    assert log.final_covered == log.total == len(p.block_ids())


def test_suite_replays_to_recorded_coverage():
    p = bundled_program("fig1")
    suite, _ = generate_suite(p, SearchConfig(seed=4))
    for test in suite.tests:
        trace = run_test(p, suite.step_config, suite.seed, test.events)
        assert set(test.covers) == trace.executed


def test_zero_evaluations():
    suite, log = generate_suite(bundled_program("pingpong"), SearchConfig(max_evaluations=0))
    assert suite.tests == [] and log.rows == []


def test_initial_population_only():
    suite, log = generate_suite(bundled_program("pingpong"), SearchConfig(max_evaluations=10))
    assert len(log.rows) == 10
    assert all(len(t.events) <= 2 for t in suite.tests)


def test_same_seed_same_log():
    p = bundled_program("fruit")
    config = SearchConfig(seed=3, max_evaluations=200)
    a_suite, a_log = generate_suite(p, config)
    b_suite, b_log = generate_suite(p, config)
    assert a_log.to_csv() == b_log.to_csv()
    assert a_suite.dumps() == b_suite.dumps()


@pytest.mark.parametrize("name", ["pingpong", "green"])
def test_archive_monotone_over_generations(name):
    p = bundled_program(name)
    sizes, lengths = [], []

    def watch(generation, archive):
        sizes.append(len(archive.entries))
        lengths.append({t: e.length for t, e in archive.entries.items()})

    generate_suite(p, SearchConfig(seed=1, max_generations=25), on_generation=watch)
    assert sizes == sorted(sizes)
    for before, after in zip(lengths, lengths[1:]):
        for target, n in before.items():
            assert after[target] <= n


def test_log_coverage_monotone():
    _, log = generate_suite(bundled_program("green"), SearchConfig(seed=2, max_evaluations=150))
    covered = [c for _, _, c in log.rows]
    times = [t for t, _, _ in log.rows]
    assert covered == sorted(covered) and times == sorted(times)


def test_budget_is_wall_equivalent_time():
    _, log = generate_suite(bundled_program("green"), SearchConfig(seed=0, max_wall_ms=5000))
    # the run that crosses the budget is the last one
    assert log.rows[-2][0] < 5000 <= log.rows[-1][0]


def test_campaign_csv_round_trip():
    log = CampaignLog(5, [(1.5, 1, 2), (3.0, 2, 4)])
    text = log.to_csv()
    assert text.splitlines()[0] == "elapsed_ms,evaluations,covered,total"
    back = CampaignLog.from_csv(text)
    assert back.rows == log.rows and back.total == 5
    assert log.coverage_at(2.0) == 2 and log.final_coverage == 0.8


def test_suite_json_round_trip():
    suite, _ = generate_suite(bundled_program("fig1"), SearchConfig(seed=1))
    again = TestSuite.from_json(suite.to_json())
    assert again.dumps() == suite.dumps()
    assert again.step_config == StepConfig(acceleration=5)


@pytest.mark.parametrize("kwargs", [dict(population_size=1), dict(crossover_probability=1.5),
                                    dict(max_length=0), dict(rank_bias=3.0)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SearchConfig(**kwargs)
