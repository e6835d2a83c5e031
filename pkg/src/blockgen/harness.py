"""Random-testing baseline and the statistics used to compare campaigns."""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from . import events as ev
from .program import Program, collect_static_facts
from .search import CampaignLog
from .vm import StepConfig, VirtualMachine


class InsufficientData(ValueError):
    pass


def _instantiate(template: ev.Event, program: Program, rng: random.Random) -> Optional[ev.Event]:
    if template.kind == "Wait":
        return None
    if template.kind == "MouseMove":
        w, h = program.stage_width, program.stage_height
        return ev.mouse_move(rng.randint(0, int(w)) - w / 2.0, rng.randint(0, int(h)) - h / 2.0)
    return template


def random_campaign(program: Program, step_config: Optional[StepConfig] = None, budget_ms: float = 60000.0,
                    seed: int = 0, event_interval_ms: float = 250.0,
                    reset_interval_ms: float = 10000.0) -> CampaignLog:
    """Uniformly random menu events at a fixed interval, restarting the program periodically.

    All times are wall-equivalent milliseconds, so with an acceleration
    factor k the program sees k times as much virtual time.  The
    ``evaluations`` column counts program restarts.
    """
    step_config = step_config or StepConfig()
    facts = collect_static_facts(program)
    n_targets = len(program.block_ids())
    targets = set(program.block_ids())
    log = CampaignLog(n_targets)
    rng = random.Random(seed)
    per_step = step_config.step_duration_ms / Fraction(repr(float(step_config.acceleration)))
    budget = Fraction(repr(float(budget_ms)))
    interval = Fraction(repr(float(event_interval_ms)))
    window = Fraction(repr(float(reset_interval_ms)))
    covered: set[str] = set()
    elapsed = Fraction(0)
    runs = 0
    while elapsed < budget:
        vm = VirtualMachine(program, step_config, rng.randrange(2**31), facts)
        runs += 1
        started = elapsed
        next_event = Fraction(0)
        # the green-flag step
        record = vm.step()
        elapsed += per_step
        if record is not None:
            covered.update(record.executed)
        log.record(float(elapsed), runs, len(covered & targets))
        while elapsed < budget and elapsed - started < window:
            pending = ()
            injected = False
            if elapsed - started >= next_event:
                next_event += interval
                injected = True
                event = _instantiate(rng.choice(vm.event_menu()), program, rng)
                pending = (event,) if event is not None else ()
            record = vm.step(pending)
            elapsed += per_step
            if record is not None:
                covered.update(record.executed)
            if injected:
                log.record(float(elapsed), runs, len(covered & targets))
    if log.rows and log.rows[-1][0] != float(elapsed):
        log.record(float(elapsed), runs, len(covered & targets))
    return log


# ---------------------------------------------------------------------------
# statistics


def a12(a: Sequence[float], b: Sequence[float]) -> float:
    """Vargha-Delaney effect size: P(X > Y) + P(X = Y) / 2 for X from a, Y from b."""
    if not a or not b:
        raise InsufficientData("both samples must be non-empty")
    more = same = 0
    for x in a:
        for y in b:
            if x > y:
                more += 1
            elif x == y:
                same += 1
    return (more + 0.5 * same) / (len(a) * len(b))


def _midranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


EXACT_LIMIT = 20


def mann_whitney_u(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """U statistic of ``a`` and the two-sided p-value.

    Exact permutation distribution (midranks for ties) when the pooled size
    is at most 20, normal approximation with tie and continuity correction
    beyond.
    """
    na, nb = len(a), len(b)
    if na == 0 or nb == 0:
        raise InsufficientData("both samples must be non-empty")
    pooled = list(a) + list(b)
    ranks = _midranks(pooled)
    n = na + nb
    offset = na * (na + 1) / 2.0
    u = sum(ranks[:na]) - offset
    mu = na * nb / 2.0
    if n <= EXACT_LIMIT:
        observed = abs(u - mu)
        extreme = total = 0
        for combo in itertools.combinations(range(n), na):
            total += 1
            if abs(sum(ranks[i] for i in combo) - offset - mu) >= observed - 1e-9:
                extreme += 1
        return u, extreme / total
    ties = {}
    for v in pooled:
        ties[v] = ties.get(v, 0) + 1
    tie_term = sum(t ** 3 - t for t in ties.values()) / (n * (n - 1))
    var = na * nb / 12.0 * ((n + 1) - tie_term)
    if var <= 0:
        return u, 1.0
    z = max(0.0, abs(u - mu) - 0.5) / math.sqrt(var)
    return u, min(1.0, math.erfc(z / math.sqrt(2.0)))


@dataclass(frozen=True)
class StatsReport:
    a12: float
    p_value: float
    n_a: int
    n_b: int
    mean_a: float
    mean_b: float

    def to_json(self) -> dict:
        return {
            "a12": self.a12,
            "pValue": self.p_value,
            "nA": self.n_a,
            "nB": self.n_b,
            "meanA": self.mean_a,
            "meanB": self.mean_b,
        }


def compare_samples(a: Sequence[float], b: Sequence[float]) -> StatsReport:
    if len(a) < 2 or len(b) < 2:
        raise InsufficientData(f"need at least 2 runs per side, got {len(a)} and {len(b)}")
    _, p = mann_whitney_u(a, b)
    return StatsReport(a12(a, b), p, len(a), len(b), sum(a) / len(a), sum(b) / len(b))


def compare_campaigns(a: Sequence[CampaignLog], b: Sequence[CampaignLog]) -> StatsReport:
    """Compare final coverage (fraction of targets) of two sets of runs."""
    return compare_samples([log.final_coverage for log in a], [log.final_coverage for log in b])
