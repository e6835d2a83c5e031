"""Headless, deterministic virtual-time interpreter for block programs.

Every thread is a Python generator; ``yield`` marks a yield point (end of a
loop iteration, a pending wait, an unanswered question, ...).  One call to
:meth:`VirtualMachine.step` applies the pending input events, resumes every
runnable thread until its next yield point and advances the virtual clock by
one step.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Iterator, Optional, Union

from .events import Event
from .fitness import logical_and, logical_not, logical_or, relational_distances, to_number
from .program import MYSELF, Block, Expr, Program, Script, SpriteDef, StaticFacts, collect_static_facts

MAX_CLONES = 300
MAX_CALL_DEPTH = 64
MAX_THREAD_RUNS_PER_STEP = 2000
DEFAULT_EVENT_MS = 250


def _fraction(value: Union[int, float, Fraction, str]) -> Fraction:
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class StepConfig:
    """Virtual clock settings.

    ``step_duration_ms`` is the VM timer advance per step; durations of timed
    blocks (and of Wait events) are divided by ``acceleration``.  One step
    costs ``step_duration_ms / acceleration`` of wall-equivalent time.
    """

    step_duration_ms: Fraction = Fraction(100, 3)
    acceleration: float = 1.0
    default_event_ms: float = DEFAULT_EVENT_MS

    def __post_init__(self):
        object.__setattr__(self, "step_duration_ms", _fraction(self.step_duration_ms))
        object.__setattr__(self, "default_event_ms", float(self.default_event_ms))
        if self.step_duration_ms <= 0:
            raise ValueError("step_duration_ms must be positive")
        if not self.acceleration > 0:
            raise ValueError("acceleration must be positive")

    def steps_for_ms(self, duration_ms) -> int:
        """Number of steps a timed block of ``duration_ms`` lasts."""
        scaled = _fraction(duration_ms) / _fraction(self.acceleration)
        return max(0, math.ceil(scaled / self.step_duration_ms))

    def steps_for_seconds(self, seconds) -> int:
        return self.steps_for_ms(_fraction(seconds) * 1000)

    @property
    def wall_ms_per_step(self) -> float:
        return float(self.step_duration_ms / _fraction(self.acceleration))

    def to_json(self) -> dict:
        return {
            "stepDurationMs": str(self.step_duration_ms),
            "acceleration": self.acceleration,
            "defaultEventMs": self.default_event_ms,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "StepConfig":
        return cls(
            step_duration_ms=Fraction(doc.get("stepDurationMs", "100/3")),
            acceleration=float(doc.get("acceleration", 1.0)),
            default_event_ms=float(doc.get("defaultEventMs", DEFAULT_EVENT_MS)),
        )


class RuntimeFault(Exception):
    """A recoverable runtime problem; recorded in the trace, never raised out of a run."""

    def __init__(self, block_id: Optional[str], message: str):
        super().__init__(f"{block_id}: {message}")
        self.block_id = block_id
        self.message = message


class _StopThread(Exception):
    pass


class _StopAll(Exception):
    pass


# ---------------------------------------------------------------------------
# traces


@dataclass
class StepRecord:
    clock_ms: float
    executed: tuple[str, ...]
    branches: dict[str, tuple[float, float]]

    def to_json(self) -> dict:
        return {
            "clock": self.clock_ms,
            "executed": list(self.executed),
            "branches": {k: [v[0], v[1]] for k, v in self.branches.items()},
        }


@dataclass
class ExecutionTrace:
    executed: set[str] = field(default_factory=set)
    steps: list[StepRecord] = field(default_factory=list)
    branches: dict[str, list[float]] = field(default_factory=dict)
    events: list[tuple[float, Event]] = field(default_factory=list)
    faults: list[tuple[int, Optional[str], str]] = field(default_factory=list)
    wall_ms_per_step: float = 0.0
    budget_exceeded: bool = False

    @property
    def step_count(self) -> int:
        return len(self.steps)

    @property
    def elapsed_ms(self) -> float:
        """Wall-equivalent time the run took (steps scaled by the acceleration)."""
        return self.step_count * self.wall_ms_per_step

    def distance(self, node: str, outcome: bool) -> Optional[float]:
        record = self.branches.get(node)
        if record is None:
            return None
        return record[0] if outcome else record[1]

    def prefix(self, n_steps: int) -> "ExecutionTrace":
        """The trace as it looked after the first ``n_steps`` steps."""
        out = ExecutionTrace(wall_ms_per_step=self.wall_ms_per_step)
        for record in self.steps[:n_steps]:
            out.steps.append(record)
            out.executed.update(record.executed)
            for node, (d_true, d_false) in record.branches.items():
                current = out.branches.get(node)
                if current is None:
                    out.branches[node] = [d_true, d_false]
                else:
                    current[0] = min(current[0], d_true)
                    current[1] = min(current[1], d_false)
        return out

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_json()) + "\n" for r in self.steps)


# ---------------------------------------------------------------------------
# state


class SpriteState:
    __slots__ = ("id", "sprite", "x", "y", "width", "height", "visible", "direction", "say", "is_clone", "alive")

    def __init__(self, target_id: str, sprite: SpriteDef, is_clone: bool = False):
        self.id = target_id
        self.sprite = sprite
        self.x = sprite.x
        self.y = sprite.y
        self.width = sprite.width
        self.height = sprite.height
        self.visible = sprite.visible
        self.direction = sprite.direction
        self.say: Optional[str] = None
        self.is_clone = is_clone
        self.alive = True

    def snapshot(self) -> tuple:
        return (self.id, self.x, self.y, self.width, self.height, self.visible, self.direction, self.say)


class Thread:
    __slots__ = ("target", "script", "gen", "done", "status", "depth")

    def __init__(self, target: SpriteState, script: Script):
        self.target = target
        self.script = script
        self.gen: Optional[Iterator] = None
        self.done = False
        self.status = "running"
        self.depth = 0


class VmState:
    """Concrete program state: sprites, variables, threads, inputs and clock."""

    def __init__(self, program: Program, config: StepConfig, seed: int):
        self.config = config
        self.targets: dict[str, SpriteState] = {}
        for sprite in program.targets:
            self.targets[sprite.name] = SpriteState(sprite.name, sprite)
        self.variables: dict[str, Union[float, str]] = dict(program.variables)
        self.threads: list[Thread] = []
        self.step_index = 0
        self.answer = ""
        self.mouse_x = 0.0
        self.mouse_y = 0.0
        self.mouse_down = False
        self.keys_down: set[str] = set()
        self.keys_pressed: set[str] = set()
        self.loudness = 0.0
        self.rng = random.Random(seed)
        self.halted = False
        self.clone_counter = 0
        self.ask_queue: list[Thread] = []
        self.loudness_seen: dict[tuple[str, str], bool] = {}

    @property
    def clock_ms(self) -> float:
        return float(self.step_index * self.config.step_duration_ms)

    @property
    def asking(self) -> bool:
        return any(not t.done for t in self.ask_queue)

    def clones_of(self, name: str) -> list[SpriteState]:
        return [t for t in self.targets.values() if t.is_clone and t.sprite.name == name]

    def snapshot(self) -> dict:
        return {
            "targets": [t.snapshot() for t in self.targets.values()],
            "variables": sorted(self.variables.items()),
            "threads": [(t.target.id, t.script.hat.id, t.status) for t in self.threads if not t.done],
            "step": self.step_index,
            "answer": self.answer,
            "mouse": (self.mouse_x, self.mouse_y, self.mouse_down),
            "keys": sorted(self.keys_down),
            "loudness": self.loudness,
            "halted": self.halted,
            "rng": self.rng.getstate(),
        }


# ---------------------------------------------------------------------------
# helpers


def to_bool(value: Any) -> bool:
    if isinstance(value, str):
        return value.strip().lower() not in ("", "0", "false")
    return bool(value) and not (isinstance(value, float) and math.isnan(value))


def boxes_overlap(a: SpriteState, b: SpriteState) -> bool:
    return (
        abs(a.x - b.x) <= (a.width + b.width) / 2.0
        and abs(a.y - b.y) <= (a.height + b.height) / 2.0
    )


def edge_gaps(x: float, y: float, width: float, height: float, stage_w: float, stage_h: float):
    """Distances from a bounding box to the left, right, bottom and top stage edges."""
    return (
        (x - width / 2.0) + stage_w / 2.0,
        stage_w / 2.0 - (x + width / 2.0),
        (y - height / 2.0) + stage_h / 2.0,
        stage_h / 2.0 - (y + height / 2.0),
    )


def _normalize_direction(direction: float) -> float:
    d = math.fmod(direction, 360.0)
    if d > 180.0:
        d -= 360.0
    elif d <= -180.0:
        d += 360.0
    return d


# ---------------------------------------------------------------------------
# the machine


class VirtualMachine:
    def __init__(self, program: Program, config: Optional[StepConfig] = None, seed: int = 0,
                 facts: Optional[StaticFacts] = None):
        self.program = program
        self.config = config or StepConfig()
        self.seed = seed
        self.facts = facts or collect_static_facts(program)
        self._hats: dict[str, dict[str, list[Script]]] = {}
        for target in program.targets:
            by_event: dict[str, list[Script]] = {}
            for script in target.scripts:
                by_event.setdefault(script.hat.event, []).append(script)
            self._hats[target.name] = by_event
        self._steps_cache: dict[Any, int] = {}
        self._diagonal = math.hypot(program.stage_width, program.stage_height)
        self._simple = {
            "stopAll": self._stop_all,
            "createCloneOf": self._create_clone,
            "deleteThisClone": self._delete_clone,
            "broadcast": self._broadcast,
            "goToXY": self._go_to,
            "changeXBy": self._change_x,
            "changeYBy": self._change_y,
            "pointInDirection": self._point,
            "ifOnEdgeBounce": self._bounce,
            "moveSteps": self._move,
            "say": self._say,
            "show": self._show,
            "hide": self._hide,
            "setVariable": self._set_variable,
            "changeVariableBy": self._change_variable,
        }
        self._control = {
            "wait": self._wait,
            "forever": self._forever,
            "repeat": self._repeat,
            "repeatUntil": self._repeat_until,
            "if": self._if,
            "ifElse": self._if_else,
            "waitUntil": self._wait_until,
            "broadcastAndWait": self._broadcast_and_wait,
            "callProcedure": self._call,
            "glideSecsToXY": self._glide,
            "sayForSecs": self._say_for_secs,
            "askAndWait": self._ask,
        }
        self._values = {
            "literal": lambda e, t: e.args["value"],
            "variable": lambda e, t: self.state.variables.get(e.args["name"], 0.0),
            "+": lambda e, t: self._num(e.args["a"], t) + self._num(e.args["b"], t),
            "-": lambda e, t: self._num(e.args["a"], t) - self._num(e.args["b"], t),
            "*": lambda e, t: self._num(e.args["a"], t) * self._num(e.args["b"], t),
            "/": self._divide,
            "pickRandom": self._pick_random,
            "distanceTo": lambda e, t: self._nearest(t, e.args["sprite"])[1],
            "mouseX": lambda e, t: self.state.mouse_x,
            "mouseY": lambda e, t: self.state.mouse_y,
            "answer": lambda e, t: self.state.answer,
            "loudness": lambda e, t: self.state.loudness,
            "xPosition": lambda e, t: t.x,
            "yPosition": lambda e, t: t.y,
            "direction": lambda e, t: t.direction,
        }
        self.reset()

    # -- lifecycle ---------------------------------------------------------

    def reset(self) -> VmState:
        """Fresh state with one thread per green-flag script; the clock is 0."""
        self.state = VmState(self.program, self.config, self.seed)
        self.trace = ExecutionTrace(wall_ms_per_step=self.config.wall_ms_per_step)
        self._current: Optional[str] = None
        for target in list(self.state.targets.values()):
            self._start_hats(target, "greenFlag")
        return self.state

    def start(self) -> None:
        """Reset and run the green-flag step every test begins with."""
        self.reset()
        self.step()

    def event_menu(self) -> list[Event]:
        from .encoding import determine_events

        return determine_events(self.program, self.state, self.facts)

    # -- stepping ----------------------------------------------------------

    def step(self, events: Iterable[Event] = ()) -> Optional[StepRecord]:
        st = self.state
        if st.halted:
            return None
        self._step_exec: dict[str, None] = {}
        self._step_branches: dict[str, tuple[float, float]] = {}
        clock = st.clock_ms
        for event in events:
            self.trace.events.append((clock, event))
            self._apply_event(event)
        self._fire_loudness_hats()
        self._run_threads()
        st.keys_pressed.clear()
        st.loudness = 0.0
        st.step_index += 1
        record = StepRecord(clock, tuple(self._step_exec), self._step_branches)
        self.trace.steps.append(record)
        self.trace.executed.update(self._step_exec)
        return record

    def apply(self, event: Event) -> int:
        """Send one test event; returns the number of steps it spanned."""
        if event.kind == "Wait":
            n = max(1, self.config.steps_for_ms(event.duration_ms))
            self.trace.events.append((self.state.clock_ms, event))
            for _ in range(n):
                self.step()
            return n
        self.step((event,))
        return 1

    def _run_threads(self) -> None:
        st = self.state
        threads = st.threads
        runs = 0
        i = 0
        while i < len(threads):
            th = threads[i]
            i += 1
            if th.done:
                continue
            runs += 1
            if runs > MAX_THREAD_RUNS_PER_STEP:
                break
            try:
                next(th.gen)
            except StopIteration:
                th.done = True
            except _StopThread:
                th.done = True
            except _StopAll:
                self._halt()
                return
        st.threads = [t for t in st.threads if not t.done]

    def _halt(self) -> None:
        st = self.state
        st.halted = True
        for th in st.threads:
            th.done = True
        st.threads = []

    # -- threads -----------------------------------------------------------

    def _spawn(self, target: SpriteState, script: Script, restart: bool = True) -> Optional[Thread]:
        for th in self.state.threads:
            if not th.done and th.target is target and th.script is script:
                if not restart:
                    return None
                th.done = True
        th = Thread(target, script)
        th.gen = self._thread_main(th)
        self.state.threads.append(th)
        return th

    def _start_hats(self, target: SpriteState, event: str, restart: bool = True,
                    match=None) -> list[Thread]:
        started = []
        for script in self._hats[target.sprite.name].get(event, ()):
            if match is not None and not match(script.hat.params):
                continue
            th = self._spawn(target, script, restart)
            if th is not None:
                started.append(th)
        return started

    def _thread_main(self, th: Thread):
        self._mark(th.script.hat.id)
        yield from self._run_blocks(th, th.script.body)

    def _run_blocks(self, th: Thread, blocks):
        for block in blocks:
            self._mark(block.id)
            self._current = block.id
            simple = self._simple.get(block.op)
            if simple is not None:
                simple(th, block)
                continue
            gen = self._control[block.op](th, block)
            if gen is not None:
                yield from gen

    def _mark(self, block_id: str) -> None:
        self._step_exec[block_id] = None

    def _record(self, node: str, d_true: float, d_false: float) -> None:
        step = self._step_branches.get(node)
        if step is None or d_true < step[0] or d_false < step[1]:
            self._step_branches[node] = (
                d_true if step is None else min(step[0], d_true),
                d_false if step is None else min(step[1], d_false),
            )
        total = self.trace.branches.get(node)
        if total is None:
            self.trace.branches[node] = [d_true, d_false]
        else:
            if d_true < total[0]:
                total[0] = d_true
            if d_false < total[1]:
                total[1] = d_false

    def _fault(self, message: str) -> None:
        self.trace.faults.append((self.state.step_index, self._current, message))

    # -- events ------------------------------------------------------------

    def _apply_event(self, event: Event) -> None:
        st = self.state
        kind = event.kind
        if kind == "KeyPress":
            st.keys_pressed.add(event.key)
            for target in list(st.targets.values()):
                self._start_hats(target, "keyPressed", restart=False,
                                 match=lambda p: p["key"] == event.key)
        elif kind == "KeyDown":
            st.keys_down ^= {event.key}
        elif kind == "ClickSprite":
            target = st.targets.get(event.target)
            if target is not None and target.visible and not target.sprite.is_stage:
                self._start_hats(target, "spriteClicked")
        elif kind == "ClickStage":
            self._start_hats(st.targets[self.program.stage.name], "stageClicked")
        elif kind == "TypeText":
            while st.ask_queue:
                th = st.ask_queue.pop(0)
                if not th.done:
                    st.answer = event.text
                    th.status = "running"
                    break
        elif kind == "MouseDown":
            st.mouse_down = not st.mouse_down
        elif kind == "MouseMove":
            st.mouse_x = float(event.x)
            st.mouse_y = float(event.y)
        elif kind == "Sound":
            st.loudness = float(event.volume)

    def _fire_loudness_hats(self) -> None:
        if not self.facts.loudness_thresholds:
            return
        st = self.state
        for target in list(st.targets.values()):
            for script in self._hats[target.sprite.name].get("loudnessGreater", ()):
                key = (target.id, script.hat.id)
                now = st.loudness > script.hat.params["threshold"]
                if now and not st.loudness_seen.get(key, False):
                    self._spawn(target, script, restart=False)
                st.loudness_seen[key] = now

    # -- expressions -------------------------------------------------------

    def value(self, expr: Expr, target: SpriteState) -> Any:
        fn = self._values.get(expr.op)
        if fn is not None:
            return fn(expr, target)
        return self.evaluate_predicate(expr, target)[0]

    def _num(self, expr: Expr, target: SpriteState) -> float:
        if expr.op == "literal":
            v = expr.args["value"]
            return v if isinstance(v, float) else to_number(v)
        return to_number(self.value(expr, target))

    def _divide(self, expr: Expr, target: SpriteState) -> float:
        a = self._num(expr.args["a"], target)
        b = self._num(expr.args["b"], target)
        if b == 0:
            self._fault("division by zero")
            return 0.0
        return a / b

    def _pick_random(self, expr: Expr, target: SpriteState) -> float:
        lo = self._num(expr.args["from"], target)
        hi = self._num(expr.args["to"], target)
        if lo > hi:
            lo, hi = hi, lo
        if lo == int(lo) and hi == int(hi):
            return float(self.state.rng.randint(int(lo), int(hi)))
        return lo + self.state.rng.random() * (hi - lo)

    def evaluate_predicate(self, expr: Expr, target: SpriteState) -> tuple[bool, float, float]:
        """Truth value plus the distances to making it true and to making it false."""
        op = expr.op
        if op in ("<", ">", "="):
            a = self.value(expr.args["a"], target)
            b = self.value(expr.args["b"], target)
            return relational_distances(op, a, b)
        if op == "and":
            return logical_and(self.evaluate_predicate(expr.args["a"], target),
                               self.evaluate_predicate(expr.args["b"], target))
        if op == "or":
            return logical_or(self.evaluate_predicate(expr.args["a"], target),
                              self.evaluate_predicate(expr.args["b"], target))
        if op == "not":
            return logical_not(self.evaluate_predicate(expr.args["a"], target))
        if op == "touchingSprite":
            return self._touching(target, expr.args["sprite"])
        if op == "touchingEdge":
            return self._touching_edge(target)
        if op == "keyDown":
            key = expr.args["key"]
            truth = key in self.state.keys_down or key in self.state.keys_pressed
        elif op == "mouseDown":
            truth = self.state.mouse_down
        else:
            truth = to_bool(self.value(expr, target))
        return (True, 0.0, 1.0) if truth else (False, 1.0, 0.0)

    def _instances(self, name: str) -> Iterator[SpriteState]:
        for t in self.state.targets.values():
            if t.sprite.name == name and t.alive:
                yield t

    def _nearest(self, target: SpriteState, name: str) -> tuple[Optional[SpriteState], float]:
        best, best_d = None, math.inf
        for other in self._instances(name):
            if other is target:
                continue
            d = math.hypot(other.x - target.x, other.y - target.y)
            if d < best_d:
                best, best_d = other, d
        return best, best_d

    def _touching(self, target: SpriteState, name: str) -> tuple[bool, float, float]:
        if target.sprite.is_stage:
            return (False, 1.0, 0.0)
        # hidden instances cannot be touched, so only visible ones guide the search;
        # with none on stage the distance is the worst one possible
        best = self._diagonal
        for other in self._instances(name):
            if other is target or not other.visible:
                continue
            if target.visible and boxes_overlap(target, other):
                return (True, 0.0, 1.0)
            d = math.hypot(other.x - target.x, other.y - target.y)
            if d < best:
                best = d
        return (False, best if best > 0.0 else 1.0, 0.0)

    def _touching_edge(self, target: SpriteState) -> tuple[bool, float, float]:
        if target.sprite.is_stage:
            return (False, 1.0, 0.0)
        gap = min(edge_gaps(target.x, target.y, target.width, target.height,
                            self.program.stage_width, self.program.stage_height))
        if gap <= 0 and target.visible:
            return (True, 0.0, 1.0)
        return (False, gap if gap > 0 else 1.0, 0.0)

    def _condition(self, th: Thread, block: Block) -> bool:
        truth, d_true, d_false = self.evaluate_predicate(block.args["condition"], th.target)
        self._record(block.id, d_true, d_false)
        return truth

    # -- timing ------------------------------------------------------------

    def _steps(self, seconds: float) -> int:
        n = self._steps_cache.get(seconds)
        if n is None:
            n = self.config.steps_for_seconds(max(0.0, seconds)) if math.isfinite(seconds) else 0
            self._steps_cache[seconds] = n
        return n

    def _sleep(self, th: Thread, n: int):
        th.status = "waiting"
        for _ in range(max(1, n)):
            yield
        th.status = "running"

    # -- control blocks ----------------------------------------------------

    def _wait(self, th, block):
        return self._sleep(th, self._steps(self._num(block.args["duration"], th.target)))

    def _forever(self, th, block):
        body = block.children[0]
        while True:
            self._mark(block.id)
            self._record(block.id, 0.0, 1.0)
            yield from self._run_blocks(th, body)
            yield

    def _repeat(self, th, block):
        times = self._num(block.args["times"], th.target)
        n = int(math.floor(times + 0.5)) if math.isfinite(times) else 0
        body = block.children[0]
        i = 0
        while True:
            remaining = n - i
            if remaining <= 0:
                self._record(block.id, float(1 - remaining), 0.0)
                return
            self._record(block.id, 0.0, float(remaining))
            yield from self._run_blocks(th, body)
            yield
            i += 1
            self._mark(block.id)

    def _repeat_until(self, th, block):
        body = block.children[0]
        while not self._condition(th, block):
            yield from self._run_blocks(th, body)
            yield
            self._mark(block.id)

    def _if(self, th, block):
        if self._condition(th, block):
            return self._run_blocks(th, block.children[0])
        return None

    def _if_else(self, th, block):
        branch = block.children[0] if self._condition(th, block) else block.children[1]
        return self._run_blocks(th, branch)

    def _wait_until(self, th, block):
        while not self._condition(th, block):
            th.status = "waitingUntil"
            yield
            self._mark(block.id)
        th.status = "running"

    def _broadcast(self, th, block) -> list[Thread]:
        message = block.args["message"]
        started = []
        for target in list(self.state.targets.values()):
            started += self._start_hats(target, "receiveMessage",
                                        match=lambda p: p["message"] == message)
        return started

    def _broadcast_and_wait(self, th, block):
        started = self._broadcast(th, block)
        return self._join(th, started)

    def _join(self, th, threads):
        th.status = "waiting"
        yield
        while any(not t.done for t in threads):
            yield
        th.status = "running"

    def _call(self, th, block):
        proc = th.target.sprite.procedures[block.args["name"]]
        if th.depth >= MAX_CALL_DEPTH:
            self._fault("call depth exceeded")
            raise _StopThread()
        return self._call_body(th, proc)

    def _call_body(self, th, proc):
        self._mark(proc.hat.id)
        th.depth += 1
        try:
            yield from self._run_blocks(th, proc.body)
        finally:
            th.depth -= 1

    def _stop_all(self, th, block):
        raise _StopAll()

    def _create_clone(self, th, block):
        st = self.state
        name = block.args["sprite"]
        source = th.target if name == MYSELF else st.targets[name]
        if sum(1 for t in st.targets.values() if t.is_clone) >= MAX_CLONES:
            return
        st.clone_counter += 1
        clone = SpriteState(f"{source.sprite.name}#{st.clone_counter}", source.sprite, is_clone=True)
        for attr in ("x", "y", "width", "height", "visible", "direction"):
            setattr(clone, attr, getattr(source, attr))
        st.targets[clone.id] = clone
        self._start_hats(clone, "startAsClone")

    def _delete_clone(self, th, block):
        target = th.target
        if not target.is_clone:
            return
        target.alive = False
        del self.state.targets[target.id]
        for other in self.state.threads:
            if other.target is target:
                other.done = True
        raise _StopThread()

    # -- motion ------------------------------------------------------------

    def _place(self, target: SpriteState, x: float, y: float) -> None:
        if target.sprite.is_stage:
            return
        w, h = self.program.stage_width / 2.0, self.program.stage_height / 2.0
        inset = math.floor(min(15.0, min(target.width, target.height) / 2.0))
        half_w, half_h = target.width / 2.0, target.height / 2.0
        if x + half_w < -w + inset:
            x = -w + inset - half_w
        elif x - half_w > w - inset:
            x = w - inset + half_w
        if y + half_h < -h + inset:
            y = -h + inset - half_h
        elif y - half_h > h - inset:
            y = h - inset + half_h
        target.x = x
        target.y = y

    def _go_to(self, th, block):
        t = th.target
        self._place(t, self._num(block.args["x"], t), self._num(block.args["y"], t))

    def _change_x(self, th, block):
        t = th.target
        self._place(t, t.x + self._num(block.args["dx"], t), t.y)

    def _change_y(self, th, block):
        t = th.target
        self._place(t, t.x, t.y + self._num(block.args["dy"], t))

    def _point(self, th, block):
        th.target.direction = _normalize_direction(self._num(block.args["direction"], th.target))

    def _move(self, th, block):
        t = th.target
        steps = self._num(block.args["steps"], t)
        rad = math.radians(90.0 - t.direction)
        self._place(t, t.x + steps * math.cos(rad), t.y + steps * math.sin(rad))

    def _bounce(self, th, block):
        t = th.target
        if t.sprite.is_stage:
            return
        left, right, bottom, top = edge_gaps(t.x, t.y, t.width, t.height,
                                             self.program.stage_width, self.program.stage_height)
        nearest = min(left, right, bottom, top)
        if nearest > 0:
            return
        rad = math.radians(90.0 - t.direction)
        dx, dy = math.cos(rad), math.sin(rad)
        if nearest == left:
            dx = max(0.2, abs(dx))
        elif nearest == top:
            dy = -max(0.2, abs(dy))
        elif nearest == right:
            dx = -max(0.2, abs(dx))
        else:
            dy = max(0.2, abs(dy))
        t.direction = _normalize_direction(math.degrees(math.atan2(dx, dy)))
        # push back inside the stage
        w, h = self.program.stage_width / 2.0, self.program.stage_height / 2.0
        x = min(max(t.x, -w + t.width / 2.0), w - t.width / 2.0)
        y = min(max(t.y, -h + t.height / 2.0), h - t.height / 2.0)
        self._place(t, x, y)

    def _glide(self, th, block):
        t = th.target
        n = self._steps(self._num(block.args["secs"], t))
        x1, y1 = self._num(block.args["x"], t), self._num(block.args["y"], t)
        if n <= 0:
            self._place(t, x1, y1)
            return None
        return self._glide_steps(th, t.x, t.y, x1, y1, n)

    def _glide_steps(self, th, x0, y0, x1, y1, n):
        t = th.target
        th.status = "waiting"
        for i in range(1, n + 1):
            yield
            frac = i / n
            self._place(t, x0 + (x1 - x0) * frac, y0 + (y1 - y0) * frac)
        th.status = "running"

    # -- looks -------------------------------------------------------------

    def _say(self, th, block):
        text = self.value(block.args["message"], th.target)
        th.target.say = None if text == "" else str(text)

    def _say_for_secs(self, th, block):
        t = th.target
        text = str(self.value(block.args["message"], t))
        t.say = text
        return self._say_steps(th, text, self._steps(self._num(block.args["secs"], t)))

    def _say_steps(self, th, text, n):
        yield from self._sleep(th, n)
        if th.target.say == text:
            th.target.say = None

    def _show(self, th, block):
        th.target.visible = True

    def _hide(self, th, block):
        th.target.visible = False

    # -- data / sensing ----------------------------------------------------

    def _set_variable(self, th, block):
        self.state.variables[block.args["variable"]] = self.value(block.args["value"], th.target)

    def _change_variable(self, th, block):
        name = block.args["variable"]
        current = to_number(self.state.variables.get(name, 0.0))
        self.state.variables[name] = current + self._num(block.args["value"], th.target)

    def _ask(self, th, block):
        question = self.value(block.args["question"], th.target)
        if not th.target.sprite.is_stage:
            th.target.say = str(question) or None
        self.state.ask_queue.append(th)
        return self._await_answer(th)

    def _await_answer(self, th):
        th.status = "asking"
        while th in self.state.ask_queue:
            yield
        th.status = "running"
        if not th.target.sprite.is_stage:
            th.target.say = None


def run_test(program: Program, config: Optional[StepConfig], seed: int, events: Iterable[Event],
             max_steps: Optional[int] = None) -> ExecutionTrace:
    """Reset, run the green-flag step, then send each event in turn."""
    vm = VirtualMachine(program, config, seed)
    vm.start()
    for event in events:
        if max_steps is not None and vm.trace.step_count >= max_steps:
            vm.trace.budget_exceeded = True
            break
        vm.apply(event)
    return vm.trace
