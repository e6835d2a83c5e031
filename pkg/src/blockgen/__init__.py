"""Search-based test generation for block-based programs."""
from .events import Event
from .program import (Program, ValidationError, bundled_program, collect_static_facts, load_program, parse_program,
                      read_program)
from .vm import ExecutionTrace, StepConfig, VirtualMachine, run_test

__version__ = "0.1.0"

__all__ = [
    "Event",
    "ExecutionTrace",
    "Program",
    "StepConfig",
    "ValidationError",
    "VirtualMachine",
    "bundled_program",
    "collect_static_facts",
    "load_program",
    "parse_program",
    "read_program",
    "run_test",
]
