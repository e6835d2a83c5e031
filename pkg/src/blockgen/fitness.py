"""Statement-coverage fitness: branch distances, approach level, normalisation."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Optional, Sequence

from .cfg import ENTRY, ControlDependence, build_super_cfg, control_dependencies, event_node
from .program import Program

if TYPE_CHECKING:
    from .vm import ExecutionTrace

Distances = tuple[bool, float, float]

# distance of a taken outcome whose target was still not reached (e.g. the run
# ended during a wait): positive, so that only covered targets score 0
REACHED_EPSILON = 1e-6


class MissingRecord(RuntimeError):
    """A branch node ran but left no distance record: an instrumentation bug."""


# ---------------------------------------------------------------------------
# scalar coercion


def as_number(value: Any) -> Optional[float]:
    """Numeric reading of a value, or None when it is not numeric text."""
    if isinstance(value, bool):
        return 1.0 if value else 0.0
    if isinstance(value, (int, float)):
        return 0.0 if math.isnan(value) else float(value)
    text = str(value).strip()
    if not text:
        return None
    try:
        number = float(text)
    except ValueError:
        return None
    return None if math.isnan(number) else number


def to_number(value: Any) -> float:
    number = as_number(value)
    return 0.0 if number is None else number


# ---------------------------------------------------------------------------
# branch distance


def relational_distances(op: str, a: Any, b: Any) -> Distances:
    """Truth plus distances to true and to false for ``a op b`` (op in <, >, =)."""
    na, nb = as_number(a), as_number(b)
    if na is None or nb is None:
        sa, sb = str(a).lower(), str(b).lower()
        truth = {"<": sa < sb, ">": sa > sb, "=": sa == sb}[op]
        return (True, 0.0, 1.0) if truth else (False, 1.0, 0.0)
    if op == ">":
        if na > nb:
            return (True, 0.0, na - nb)
        return (False, nb - na + 1.0, 0.0)
    if op == "<":
        if na < nb:
            return (True, 0.0, nb - na)
        return (False, na - nb + 1.0, 0.0)
    if na == nb:
        return (True, 0.0, 1.0)
    return (False, abs(na - nb), 0.0)


def logical_and(left: Distances, right: Distances) -> Distances:
    return (left[0] and right[0], left[1] + right[1], min(left[2], right[2]))


def logical_or(left: Distances, right: Distances) -> Distances:
    return (left[0] or right[0], min(left[1], right[1]), left[2] + right[2])


def logical_not(child: Distances) -> Distances:
    return (not child[0], child[2], child[1])


def branch_distance(op: str, operands: Sequence[Any], outcome: bool) -> float:
    """Distance from making ``op(operands)`` evaluate to ``outcome``.

    Relational operators take two scalars; ``and``/``or``/``not`` take
    ``(truth, true_distance, false_distance)`` triples of their children.
    """
    if op in ("<", ">", "="):
        result = relational_distances(op, *operands)
    elif op == "and":
        result = logical_and(*operands)
    elif op == "or":
        result = logical_or(*operands)
    elif op == "not":
        result = logical_not(*operands)
    else:
        raise ValueError(f"no distance law for {op!r}")
    return result[1] if outcome else result[2]


def normalize(distance: float) -> float:
    """Map a distance in [0, inf) to [0, 1)."""
    return distance / (distance + 1.0)


# ---------------------------------------------------------------------------
# targets


@dataclass(frozen=True)
class FitnessTarget:
    block_id: str
    dependence_chain: tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class FitnessValue:
    raw: float
    covered: bool


@dataclass(frozen=True)
class _Reach:
    cost: float
    level: int
    critical: Optional[str]


class FitnessEvaluator:
    """Per-program fitness machinery: one objective per coverable block."""

    def __init__(self, program: Program):
        self.program = program
        self.cfg = build_super_cfg(program)
        self.cdg: ControlDependence = control_dependencies(self.cfg)
        self.target_ids: list[str] = program.block_ids()
        self._hat_of_event = {event_node(h): h for h in self.cfg.hat_ids}
        self._children: dict[str, list[tuple[str, str]]] = {}
        for node, parents in self.cdg.parents.items():
            for parent, label in parents:
                if parent != node:
                    self._children.setdefault(parent, []).append((node, label))
        self.targets = [FitnessTarget(b, self.cdg.chain(b)) for b in self.target_ids]

    def _executed(self, node: str, trace: "ExecutionTrace") -> bool:
        if node == ENTRY:
            return True
        hat = self._hat_of_event.get(node)
        return (hat if hat is not None else node) in trace.executed

    def _outcome_distance(self, parent: str, label: str, trace: "ExecutionTrace") -> float:
        if label in ("true", "false") and parent in self.cfg.branch_nodes:
            d = trace.distance(parent, label == "true")
            if d is None:
                raise MissingRecord(f"branch {parent} executed without a distance record")
        elif parent == ENTRY:
            # the user event never happened
            d = 1.0
        else:
            d = 0.0
        return max(d, REACHED_EPSILON)

    def reach(self, trace: "ExecutionTrace") -> dict[str, _Reach]:
        """Cost, approach level and critical branch for every unexecuted node.

        cost(n) = min over control parents (p, o) of
        normalize(distance of p to o) if p ran, else 1 + cost(p).
        """
        best: dict[str, _Reach] = {}
        heap: list[tuple[float, int, str, str, Optional[str]]] = []
        counter = 0
        for node, parents in self.cdg.parents.items():
            if self._executed(node, trace):
                continue
            for parent, label in parents:
                if parent != node and self._executed(parent, trace):
                    cost = normalize(self._outcome_distance(parent, label, trace))
                    heap.append((cost, counter, node, label, parent))
                    counter += 1
        heapq.heapify(heap)
        while heap:
            cost, _, node, _, critical = heapq.heappop(heap)
            if node in best:
                continue
            level = int(math.floor(cost))
            best[node] = _Reach(cost, level, critical)
            for child, label in self._children.get(node, ()):
                if child not in best and not self._executed(child, trace):
                    counter += 1
                    heapq.heappush(heap, (cost + 1.0, counter, child, label, critical))
        return best

    def approach_level(self, target: FitnessTarget, trace: "ExecutionTrace",
                       reach: Optional[dict] = None) -> tuple[int, Optional[str]]:
        if target.block_id in trace.executed:
            return 0, None
        reach = self.reach(trace) if reach is None else reach
        r = reach.get(target.block_id)
        if r is None:
            return len(target.dependence_chain), None
        return r.level, r.critical

    def fitness(self, target: FitnessTarget, trace: "ExecutionTrace",
                reach: Optional[dict] = None) -> FitnessValue:
        if target.block_id in trace.executed:
            return FitnessValue(0.0, True)
        reach = self.reach(trace) if reach is None else reach
        r = reach.get(target.block_id)
        raw = r.cost if r is not None else float(len(target.dependence_chain) + 1)
        return FitnessValue(raw, False)

    def evaluate(self, trace: "ExecutionTrace") -> list[float]:
        """Raw fitness of every target (0 for covered ones), in target order."""
        reach = self.reach(trace)
        out = []
        for target in self.targets:
            if target.block_id in trace.executed:
                out.append(0.0)
            else:
                r = reach.get(target.block_id)
                out.append(r.cost if r is not None else float(len(target.dependence_chain) + 1))
        return out
