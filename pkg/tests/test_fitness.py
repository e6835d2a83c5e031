import itertools

import pytest
from hypothesis import given, settings, strategies as st

from blockgen import StepConfig, bundled_program, run_test
from blockgen import events as ev
from blockgen.encoding import decode_and_run
from blockgen.fitness import (FitnessEvaluator, as_number, branch_distance, logical_and, logical_or,
                              normalize, relational_distances)

from builders import B, V, build, hat, op, script, sprite


def test_greater_than_false():
    assert relational_distances(">", -75, 90) == (False, 166, 0)
    assert branch_distance(">", (-75, 90), True) == 166


def test_greater_than_true():
    assert branch_distance(">", (-75, -90), True) == 0


def test_paddle_composite():
    right = (False, 30.0, 0.0)  # not touching, 30 away
    left = (False, 50.0, 0.0)
    hit = logical_or(logical_and(right, relational_distances(">", -75, 90)),
                     logical_and(left, relational_distances(">", -75, -90)))
    assert hit[1] == min(30 + 166, 50 + 0)


def test_flower_formula():
    touching = (False, 114.0, 0.0)
    low = relational_distances("<", -129, -150)
    assert logical_and(touching, low)[1] == 136
    assert low[1] == 22


def test_string_comparisons():
    assert relational_distances("=", "Apple", "apple")[0]
    assert relational_distances("=", "a", "b") == (False, 1.0, 0.0)
    assert as_number(" 12 ") == 12.0
    assert as_number("abc") is None


def test_unknown_operator():
    with pytest.raises(ValueError):
        branch_distance("xor", (1, 2), True)


@pytest.mark.parametrize("rel", ["<", ">", "="])
def test_zero_distance_iff_outcome(rel):
    for a, b in itertools.product(range(-6, 7), repeat=2):
        truth = {"<": a < b, ">": a > b, "=": a == b}[rel]
        for outcome in (True, False):
            assert (branch_distance(rel, (a, b), outcome) == 0) == (truth == outcome)


def test_normalize_basics():
    assert normalize(0) == 0
    assert normalize(87) == 87 / 88


@settings(max_examples=300)
@given(st.floats(0, 1e9), st.floats(0, 1e9))
def test_normalize_monotone_and_bounded(a, b):
    assert 0 <= normalize(a) < 1
    if a < b:
        assert normalize(a) <= normalize(b)


@settings(max_examples=300)
@given(st.integers(0, 20), st.floats(0, 1e12), st.floats(0, 1e12))
def test_level_dominates_distance(level, d1, d2):
    assert level + normalize(d1) < level + 1 + normalize(d2)


def court(x):
    hit = B("if", "hit", [[B("pointInDirection", "ret", direction=op("-", a=0, b=op("direction")))]],
            condition=op("and", a=op("touchingSprite", sprite="paddle"), b=op(">", a=op("direction"), b=0)))
    play = B("ifElse", "in_play", [[hit], [B("say", "out", message="out")]],
             condition=op("and", a=op("<", a=op("xPosition"), b=225), b=op(">", a=op("xPosition"), b=-225)))
    return build([sprite("ball", [script(hat("greenFlag", "f"), B("forever", "loop", [[play]]))], x=x),
                  sprite("paddle", x=210)])


def test_approach_level_outside_court():
    p = court(300)
    fe = FitnessEvaluator(p)
    trace = run_test(p, StepConfig(), 0, [ev.wait(0.25)])
    target = fe.targets[fe.target_ids.index("ret")]
    assert fe.approach_level(target, trace) == (1, "in_play")


def test_approach_level_executed_target():
    p = bundled_program("fig1")
    fe = FitnessEvaluator(p)
    trace = run_test(p, StepConfig(), 0, [])
    target = fe.targets[fe.target_ids.index("cat_set")]
    assert fe.approach_level(target, trace) == (0, None)
    assert fe.fitness(target, trace).raw == 0.0
    assert fe.fitness(target, trace).covered


def nested(v):
    inner = B("if", "c", [[B("show", "target")]], condition=op(">", a=V("v"), b=2))
    middle = B("if", "b", [[inner]], condition=op(">", a=V("v"), b=1))
    outer = B("if", "a", [[middle]], condition=op(">", a=V("v"), b=0))
    return build([sprite("s", [script(hat("greenFlag", "f"), outer)])], variables={"v": v})


def test_three_deep_chain_level_two():
    p = nested(0)
    fe = FitnessEvaluator(p)
    trace = run_test(p, StepConfig(), 0, [])
    target = fe.targets[fe.target_ids.index("target")]
    assert fe.approach_level(target, trace) == (2, "a")
    assert fe.fitness(target, trace).raw == 2 + 1 / 2


def test_level_zero_distance_87():
    p = build([sprite("s", [script(hat("greenFlag", "f"),
                                   B("if", "gate", [[B("show", "target")]], condition=op(">", a=V("v"), b=13)))])],
              variables={"v": -73})
    fe = FitnessEvaluator(p)
    trace = run_test(p, StepConfig(), 0, [])
    target = fe.targets[fe.target_ids.index("target")]
    assert fe.fitness(target, trace).raw == pytest.approx(87 / 88, abs=1e-12)


def test_level_one_with_taken_branch():
    # the outer branch is taken but the run ends inside the wait
    inner = B("if", "inner", [[B("show", "target")]], condition=op(">", a=V("v"), b=0))
    outer = B("if", "outer", [[B("wait", duration=10), inner]], condition=op("=", a=V("v"), b=0))
    p = build([sprite("s", [script(hat("greenFlag", "f"), outer)])], variables={"v": 0})
    fe = FitnessEvaluator(p)
    trace = run_test(p, StepConfig(), 0, [ev.wait(1)])
    target = fe.targets[fe.target_ids.index("target")]
    assert fe.approach_level(target, trace) == (1, "outer")
    assert fe.fitness(target, trace).raw == pytest.approx(1.0, abs=1e-5)


def test_missing_event_costs_one_per_level():
    p = bundled_program("fig1")
    fe = FitnessEvaluator(p)
    trace = run_test(p, StepConfig(), 0, [])
    target = fe.targets[fe.target_ids.index("bear_change")]
    raw = fe.fitness(target, trace).raw
    assert 1 <= raw < 2


@settings(max_examples=60, deadline=None)
@given(st.integers(-200, 200), st.integers(-150, 150), st.floats(0.05, 0.95))
def test_touching_distance_shrinks_when_closer(bx, by, t):
    def distance(x, y):
        p = build([sprite("a", [script(hat("greenFlag"), B("if", "probe", [[B("show")]],
                                                         condition=op("touchingSprite", sprite="b")))],
                          w=10, h=10),
                   sprite("b", x=x, y=y, w=10, h=10)])
        return run_test(p, StepConfig(), 0, []).distance("probe", True)
    assert distance(bx * t, by * t) <= distance(bx, by) + 1e-9


@pytest.mark.parametrize("name", ["pingpong", "fruit", "green"])
@settings(max_examples=15, deadline=None)
@given(codons=st.lists(st.integers(0, 480), min_size=1, max_size=10))
def test_fitness_non_increasing_along_prefixes(name, codons):
    p = bundled_program(name)
    fe = FitnessEvaluator(p)
    _, trace = decode_and_run(codons, p, StepConfig(acceleration=5), 0)
    previous = None
    for n in range(1, trace.step_count + 1, max(1, trace.step_count // 8)):
        current = fe.evaluate(trace.prefix(n))
        if previous is not None:
            assert all(c <= q + 1e-12 for c, q in zip(current, previous))
        previous = current
    assert fe.evaluate(trace.prefix(trace.step_count)) == fe.evaluate(trace)


def test_evaluate_matches_fitness():
    p = bundled_program("fig1")
    fe = FitnessEvaluator(p)
    trace = run_test(p, StepConfig(), 0, [ev.click_sprite("cat")] * 3 + [ev.wait(0.25)])
    assert fe.evaluate(trace) == [fe.fitness(t, trace).raw for t in fe.targets]
    # three clicks: the = 10 check is 7 short
    say = fe.target_ids.index("cat_say")
    assert fe.evaluate(trace)[say] == pytest.approx(normalize(7))
