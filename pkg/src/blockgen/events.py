"""UI events a test sends to a program (the terminals of the test grammar)."""
from __future__ import annotations

from dataclasses import dataclass, fields
from fractions import Fraction
from typing import Any, Optional

KINDS = (
    "KeyPress",
    "KeyDown",
    "ClickSprite",
    "ClickStage",
    "TypeText",
    "MouseDown",
    "MouseMove",
    "Sound",
    "Wait",
)


@dataclass(frozen=True)
class Event:
    kind: str
    key: Optional[str] = None
    target: Optional[str] = None
    text: Optional[str] = None
    x: Optional[float] = None
    y: Optional[float] = None
    volume: Optional[float] = None
    duration_ms: Optional[float] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")

    @property
    def params(self) -> dict[str, Any]:
        return {
            f.name: getattr(self, f.name)
            for f in fields(self)
            if f.name != "kind" and getattr(self, f.name) is not None
        }

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": self.params}

    @classmethod
    def from_json(cls, doc: dict) -> "Event":
        params = dict(doc.get("params", {}))
        for name in ("x", "y", "volume", "duration_ms"):
            if name in params:
                params[name] = float(params[name])
        return cls(doc["kind"], **params)

    def __str__(self) -> str:
        if self.kind == "Wait":
            secs = self.duration_ms / 1000.0
            return f"Wait {secs:g} s"
        if self.kind == "MouseMove" and self.x is not None:
            return f"MouseMove {self.x:g} {self.y:g}"
        detail = self.key or self.target or self.text
        if detail is None and self.volume is not None:
            detail = f"{self.volume:g}"
        return f"{self.kind} {detail}" if detail is not None else self.kind


def key_press(key: str) -> Event:
    return Event("KeyPress", key=key)


def key_down(key: str) -> Event:
    return Event("KeyDown", key=key)


def click_sprite(target: str) -> Event:
    return Event("ClickSprite", target=target)


def click_stage() -> Event:
    return Event("ClickStage")


def type_text(text: str) -> Event:
    return Event("TypeText", text=text)


def mouse_down() -> Event:
    return Event("MouseDown")


def mouse_move(x: Optional[float] = None, y: Optional[float] = None) -> Event:
    return Event("MouseMove", x=x, y=y)


def sound(volume: float) -> Event:
    return Event("Sound", volume=float(volume))


def wait(seconds: float) -> Event:
    return Event("Wait", duration_ms=float(Fraction(repr(float(seconds))) * 1000))
