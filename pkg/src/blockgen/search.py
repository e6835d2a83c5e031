"""Variable-length genetic operators and the MOSA loop with its archive."""
from __future__ import annotations

import csv
import io
import json
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .encoding import CODON_MAX, decode_and_run
from .events import Event
from .fitness import FitnessEvaluator
from .program import Program, collect_static_facts
from .vm import StepConfig


class BudgetExceeded(Exception):
    """Raised by the evaluator once the search budget is used up."""


@dataclass
class SearchConfig:
    population_size: int = 10
    crossover_probability: float = 0.8
    initial_length: int = 2
    max_length: int = 50
    # delete, replace, insert: each applied with this probability
    operator_probability: float = 1.0 / 3.0
    rank_bias: float = 1.7
    max_wall_ms: Optional[float] = 60000.0
    max_generations: Optional[int] = None
    max_evaluations: Optional[int] = None
    seed: int = 0
    max_steps_per_test: Optional[int] = None

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if not 0.0 <= self.crossover_probability <= 1.0:
            raise ValueError("crossover_probability must lie in [0, 1]")
        if self.initial_length < 1 or self.max_length < 1:
            raise ValueError("chromosome lengths must be positive")
        if not 1.0 <= self.rank_bias <= 2.0:
            raise ValueError("rank_bias must lie in [1, 2]")


# ---------------------------------------------------------------------------
# genetic operators


def random_codon(rng: random.Random) -> int:
    return rng.randint(0, CODON_MAX)


def random_chromosome(config: SearchConfig, rng: random.Random) -> list[int]:
    n = rng.randint(1, min(config.initial_length, config.max_length))
    return [random_codon(rng) for _ in range(n)]


def mutate(codons: Sequence[int], config: SearchConfig, rng: random.Random) -> list[int]:
    out = list(codons)
    p = config.operator_probability
    if rng.random() < p and len(out) > 1:
        rate = 1.0 / len(out)
        kept = [c for c in out if rng.random() >= rate]
        out = kept or [out[rng.randrange(len(out))]]
    if rng.random() < p:
        rate = 1.0 / len(out)
        out = [random_codon(rng) if rng.random() < rate else c for c in out]
    if rng.random() < p:
        rate = 1.0 / len(out)
        grown = []
        for c in out:
            grown.append(c)
            if rng.random() < rate:
                grown.append(random_codon(rng))
        out = grown
    return out[: config.max_length]


def crossover(a: Sequence[int], b: Sequence[int], rho: float) -> tuple[list[int], list[int]]:
    """Relative one-point crossover: both parents split at ``floor(rho * len)``."""
    ia = math.floor(rho * len(a))
    ib = math.floor(rho * len(b))
    child_a = list(a[:ia]) + list(b[ib:])
    child_b = list(b[:ib]) + list(a[ia:])
    # only reachable with rho outside [0, 1); borrow a codon so neither child is empty
    if not child_a:
        child_a, child_b = child_b[-1:], child_b[:-1]
    elif not child_b:
        child_b, child_a = child_a[-1:], child_a[:-1]
    return child_a, child_b


def rank_probabilities(n: int, bias: float) -> list[float]:
    """Linear ranking: probability of picking rank i (0 = best) among n."""
    if n == 1:
        return [1.0]
    weights = [bias - (2.0 * (bias - 1.0) * i) / (n - 1) for i in range(n)]
    total = sum(weights)
    return [w / total for w in weights]


def rank_select(population: Sequence, bias: float, rng: random.Random):
    """Index drawn with linear ranking; ``population`` must be sorted best first."""
    n = len(population)
    if n == 1:
        return population[0]
    # inverse of the cumulative linear-ranking distribution
    r = rng.random()
    disc = bias * bias - 4.0 * (bias - 1.0) * r
    idx = int(n * (bias - math.sqrt(disc)) / (2.0 * (bias - 1.0))) if bias > 1.0 else int(n * r)
    return population[min(max(idx, 0), n - 1)]


# ---------------------------------------------------------------------------
# sorting


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    better = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            better = True
    return better


def fast_non_dominated_sort(vectors: Sequence[Sequence[float]]) -> list[list[int]]:
    """Pareto fronts as lists of indices into ``vectors`` (minimisation)."""
    n = len(vectors)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    counts = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if dominates(vectors[i], vectors[j]):
                dominated_by[i].append(j)
                counts[j] += 1
            elif dominates(vectors[j], vectors[i]):
                dominated_by[j].append(i)
                counts[i] += 1
    fronts = []
    current = [i for i in range(n) if counts[i] == 0]
    while current:
        fronts.append(current)
        nxt = []
        for i in current:
            for j in dominated_by[i]:
                counts[j] -= 1
                if counts[j] == 0:
                    nxt.append(j)
        current = sorted(nxt)
    return fronts


def crowding_distance(vectors: Sequence[Sequence[float]]) -> list[float]:
    n = len(vectors)
    if n == 0:
        return []
    dist = [0.0] * n
    m = len(vectors[0])
    for k in range(m):
        order = sorted(range(n), key=lambda i: vectors[i][k])
        lo, hi = vectors[order[0]][k], vectors[order[-1]][k]
        dist[order[0]] = dist[order[-1]] = math.inf
        if hi == lo:
            continue
        for pos in range(1, n - 1):
            dist[order[pos]] += (vectors[order[pos + 1]][k] - vectors[order[pos - 1]][k]) / (hi - lo)
    return dist


# ---------------------------------------------------------------------------
# individuals and archive


@dataclass(eq=False)
class Individual:
    codons: list[int]
    events: list[Event]
    fitness: list[float]
    executed: frozenset

    @property
    def length(self) -> int:
        return len(self.events)


def preference_sort(population: Sequence[Individual], objectives: Sequence[int]) -> list[list[Individual]]:
    """Front 0 holds the best (then shortest) individual per uncovered objective."""
    front0: list[Individual] = []
    for j in objectives:
        best = min(population, key=lambda ind: (ind.fitness[j], ind.length))
        if not any(best is ind for ind in front0):
            front0.append(best)
    rest = [ind for ind in population if not any(ind is f for f in front0)]
    fronts = [front0] if front0 else []
    vectors = [[ind.fitness[j] for j in objectives] for ind in rest]
    for idx in fast_non_dominated_sort(vectors):
        fronts.append([rest[i] for i in idx])
    return fronts


def select_survivors(fronts: Sequence[Sequence[Individual]], objectives: Sequence[int],
                     size: int) -> list[Individual]:
    out: list[Individual] = []
    for front in fronts:
        room = size - len(out)
        if room <= 0:
            break
        if len(front) <= room:
            out.extend(front)
            continue
        dist = crowding_distance([[ind.fitness[j] for j in objectives] for ind in front])
        order = sorted(range(len(front)), key=lambda i: -dist[i])
        out.extend(front[i] for i in order[:room])
    return out


class Archive:
    """Shortest covering test per target."""

    def __init__(self, target_ids: Sequence[str]):
        self.target_ids = list(target_ids)
        self.entries: dict[str, Individual] = {}

    def update(self, ind: Individual) -> bool:
        changed = False
        for target, value in zip(self.target_ids, ind.fitness):
            if value != 0.0:
                continue
            current = self.entries.get(target)
            if current is None or ind.length < current.length:
                self.entries[target] = ind
                changed = True
        return changed

    @property
    def covered(self) -> set[str]:
        return set(self.entries)

    def uncovered_indices(self) -> list[int]:
        return [i for i, t in enumerate(self.target_ids) if t not in self.entries]

    def tests(self) -> list[Individual]:
        seen: list[Individual] = []
        for target in self.target_ids:
            ind = self.entries.get(target)
            if ind is not None and not any(ind is s for s in seen):
                seen.append(ind)
        return seen


# ---------------------------------------------------------------------------
# logs and suites


@dataclass
class CampaignLog:
    total: int
    rows: list[tuple[float, int, int]] = field(default_factory=list)  # elapsed_ms, evaluations, covered

    def record(self, elapsed_ms: float, evaluations: int, covered: int) -> None:
        self.rows.append((elapsed_ms, evaluations, covered))

    @property
    def final_covered(self) -> int:
        return self.rows[-1][2] if self.rows else 0

    @property
    def final_coverage(self) -> float:
        return self.final_covered / self.total if self.total else 1.0

    def coverage_at(self, elapsed_ms: float) -> int:
        best = 0
        for t, _, c in self.rows:
            if t > elapsed_ms:
                break
            best = c
        return best

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["elapsed_ms", "evaluations", "covered", "total"])
        for t, n, c in self.rows:
            w.writerow([f"{t:.3f}", n, c, self.total])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, total: Optional[int] = None) -> "CampaignLog":
        reader = csv.DictReader(io.StringIO(text))
        rows, seen_total = [], total
        for row in reader:
            rows.append((float(row["elapsed_ms"]), int(row["evaluations"]), int(row["covered"])))
            seen_total = int(row["total"])
        if seen_total is None:
            raise ValueError("log has no rows and no total was given")
        return cls(seen_total, rows)


@dataclass
class SuiteTest:
    events: list[Event]
    covers: list[str]
    codons: Optional[list[int]] = None

    def to_json(self) -> dict:
        doc = {"events": [e.to_json() for e in self.events], "coversBlockIds": list(self.covers)}
        if self.codons is not None:
            doc["codons"] = list(self.codons)
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "SuiteTest":
        return cls([Event.from_json(e) for e in doc["events"]], list(doc.get("coversBlockIds", [])),
                   doc.get("codons"))


@dataclass
class TestSuite:
    program: str
    seed: int
    step_config: StepConfig
    tests: list[SuiteTest]
    total: int

    __test__ = False  # not a pytest class

    @property
    def covered(self) -> list[str]:
        return sorted({b for t in self.tests for b in t.covers})

    def to_json(self) -> dict:
        return {
            "program": self.program,
            "seed": self.seed,
            "stepConfig": self.step_config.to_json(),
            "totalTargets": self.total,
            "coveredBlockIds": self.covered,
            "tests": [t.to_json() for t in self.tests],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, doc: dict) -> "TestSuite":
        return cls(
            program=doc.get("program", ""),
            seed=int(doc.get("seed", 0)),
            step_config=StepConfig.from_json(doc.get("stepConfig", {})),
            tests=[SuiteTest.from_json(t) for t in doc.get("tests", [])],
            total=int(doc.get("totalTargets", 0)),
        )


# ---------------------------------------------------------------------------
# the search


class Evaluator:
    """Decodes and runs chromosomes, charging the budget and feeding the archive."""

    def __init__(self, program: Program, config: SearchConfig, step_config: StepConfig,
                 fitness: Optional[FitnessEvaluator] = None):
        self.program = program
        self.config = config
        self.step_config = step_config
        self.fitness = fitness or FitnessEvaluator(program)
        self.facts = collect_static_facts(program)
        self.archive = Archive(self.fitness.target_ids)
        self.log = CampaignLog(len(self.fitness.target_ids))
        self.evaluations = 0
        self.elapsed_ms = 0.0
        self.generations = 0

    def exhausted(self) -> bool:
        c = self.config
        return (
            (c.max_wall_ms is not None and self.elapsed_ms >= c.max_wall_ms)
            or (c.max_evaluations is not None and self.evaluations >= c.max_evaluations)
            or (c.max_generations is not None and self.generations >= c.max_generations)
        )

    def __call__(self, codons: list[int]) -> Individual:
        if self.exhausted():
            raise BudgetExceeded()
        events, trace = decode_and_run(codons, self.program, self.step_config, self.config.seed,
                                       self.config.max_steps_per_test, self.facts)
        ind = Individual(list(codons), events, self.fitness.evaluate(trace), frozenset(trace.executed))
        self.evaluations += 1
        self.elapsed_ms += trace.elapsed_ms
        self.archive.update(ind)
        self.log.record(self.elapsed_ms, self.evaluations, len(self.archive.entries))
        return ind


def _sorted_population(population: list[Individual], objectives: list[int]) -> list[Individual]:
    return [ind for front in preference_sort(population, objectives) for ind in front]


def mosa_generation(population: list[Individual], evaluate: Callable[[list[int]], Individual],
                    archive: Archive, config: SearchConfig, rng: random.Random) -> list[Individual]:
    """One generation: breed offspring from ``population`` (sorted best first), then survive."""
    offspring: list[Individual] = []
    while len(offspring) < config.population_size:
        a = rank_select(population, config.rank_bias, rng).codons
        b = rank_select(population, config.rank_bias, rng).codons
        if rng.random() < config.crossover_probability:
            a, b = crossover(a, b, rng.random())
        for child in (a, b):
            if len(offspring) < config.population_size:
                offspring.append(evaluate(mutate(child, config, rng)))
    objectives = archive.uncovered_indices()
    merged = population + offspring
    if not objectives:
        return merged[: config.population_size]
    return select_survivors(preference_sort(merged, objectives), objectives, config.population_size)


def generate_suite(program: Program, config: Optional[SearchConfig] = None,
                   step_config: Optional[StepConfig] = None,
                   on_generation: Optional[Callable[[int, Archive], None]] = None) -> tuple[TestSuite, CampaignLog]:
    config = config or SearchConfig()
    step_config = step_config or StepConfig(acceleration=5.0)
    rng = random.Random(config.seed)
    evaluate = Evaluator(program, config, step_config)
    archive = evaluate.archive
    population: list[Individual] = []
    try:
        while len(population) < config.population_size:
            population.append(evaluate(random_chromosome(config, rng)))
        while archive.uncovered_indices():
            objectives = archive.uncovered_indices()
            population = _sorted_population(population, objectives)
            population = mosa_generation(population, evaluate, archive, config, rng)
            evaluate.generations += 1
            if on_generation is not None:
                on_generation(evaluate.generations, archive)
            if evaluate.exhausted():
                break
    except BudgetExceeded:
        pass
    tests = [SuiteTest(ind.events, sorted(ind.executed), ind.codons) for ind in archive.tests()]
    suite = TestSuite(program.name, config.seed, step_config, tests, len(archive.target_ids))
    return suite, evaluate.log
