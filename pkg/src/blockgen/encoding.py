"""Grammatical-evolution mapping from codon lists to UI event sequences.

The grammar is ``testcase ::= input_1 ... input_n`` with
``input ::= determine_events(program, state)``.  A codon ``c`` picks
production ``c mod |menu|``; MouseMove consumes the two following codons as
coordinates.  Because the menu depends on the concrete state (clones,
pending questions), decoding runs the program alongside.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import events as ev
from .events import Event
from .program import Program, StaticFacts, collect_static_facts
from .vm import ExecutionTrace, StepConfig, VirtualMachine, VmState

CODON_MAX = 480


@dataclass
class Chromosome:
    codons: list[int]

    def __post_init__(self):
        if not self.codons:
            raise ValueError("a chromosome needs at least one codon")
        for c in self.codons:
            if not 0 <= c <= CODON_MAX:
                raise ValueError(f"codon {c} outside [0, {CODON_MAX}]")

    def __len__(self) -> int:
        return len(self.codons)


def determine_events(program: Program, state: VmState, facts: Optional[StaticFacts] = None) -> list[Event]:
    """Event menu available in ``state``; never empty (the default Wait is always there)."""
    facts = facts or collect_static_facts(program)
    menu: list[Event] = [ev.key_press(k) for k in facts.handled_keys]
    menu += [ev.key_down(k) for k in facts.sensed_keys]
    menu += [ev.click_sprite(name) for name in facts.clickable_sprites]
    if facts.clickable_sprites:
        clickable = set(facts.clickable_sprites)
        menu += [ev.click_sprite(t.id) for t in state.targets.values()
                 if t.is_clone and t.sprite.name in clickable]
    if facts.stage_clickable:
        menu.append(ev.click_stage())
    if facts.uses_answer and state.asking:
        menu += [ev.type_text(s) for s in facts.string_literals]
    if facts.senses_mouse_down:
        menu.append(ev.mouse_down())
    if facts.senses_mouse_position:
        menu.append(ev.mouse_move())
    # one above the threshold, so the loudness handler actually fires
    menu += [ev.sound(min(100.0, t + 1.0)) for t in facts.loudness_thresholds]
    default_ms = float(state.config.default_event_ms)
    menu.append(Event("Wait", duration_ms=default_ms))
    for secs in sorted(facts.delays):
        wait = ev.wait(secs)
        if wait.duration_ms != default_ms:
            menu.append(wait)
    return menu


def codon_to_coordinate(codon: int, extent: float) -> float:
    span = int(extent)
    return float(codon % (span + 1)) - extent / 2.0


def decode_and_run(codons, program: Program, config: Optional[StepConfig] = None, seed: int = 0,
                   max_steps: Optional[int] = None,
                   facts: Optional[StaticFacts] = None) -> tuple[list[Event], ExecutionTrace]:
    """Decode ``codons`` while executing them; returns the test and its trace.

    One event is decoded per codon.  Parameter codons that run past the end
    wrap to the start, at most once.
    """
    codons = list(codons)
    if not codons:
        raise ValueError("cannot decode an empty chromosome")
    vm = VirtualMachine(program, config, seed, facts)
    vm.start()
    n = len(codons)
    limit = 2 * n
    used = 0
    out: list[Event] = []
    while len(out) < n and used < limit:
        menu = vm.event_menu()
        choice = menu[codons[used % n] % len(menu)]
        used += 1
        if choice.kind == "MouseMove":
            if used + 2 > limit:
                break
            x = codon_to_coordinate(codons[used % n], program.stage_width)
            y = codon_to_coordinate(codons[(used + 1) % n], program.stage_height)
            used += 2
            choice = ev.mouse_move(x, y)
        if max_steps is not None and vm.trace.step_count >= max_steps:
            vm.trace.budget_exceeded = True
            break
        vm.apply(choice)
        out.append(choice)
    return out, vm.trace


def decode(codons, program: Program, config: Optional[StepConfig] = None, seed: int = 0) -> list[Event]:
    return decode_and_run(codons, program, config, seed)[0]
