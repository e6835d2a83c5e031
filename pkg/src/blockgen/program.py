"""Block-program model: AST types, JSON loading/serialization and validation."""
from __future__ import annotations

import json
from importlib import resources
from dataclasses import dataclass, field
from typing import Any, Iterator, Union

STAGE_WIDTH = 480
STAGE_HEIGHT = 360
MYSELF = "_myself_"

# argument kinds
EXPR = "expr"
NAME = "name"

# opcode -> (argument schema, number of child lists)
STATEMENTS: dict[str, tuple[dict[str, str], int]] = {
    # control
    "wait": ({"duration": EXPR}, 0),
    "forever": ({}, 1),
    "repeat": ({"times": EXPR}, 1),
    "repeatUntil": ({"condition": EXPR}, 1),
    "if": ({"condition": EXPR}, 1),
    "ifElse": ({"condition": EXPR}, 2),
    "waitUntil": ({"condition": EXPR}, 0),
    "stopAll": ({}, 0),
    "createCloneOf": ({"sprite": NAME}, 0),
    "deleteThisClone": ({}, 0),
    "broadcast": ({"message": NAME}, 0),
    "broadcastAndWait": ({"message": NAME}, 0),
    "callProcedure": ({"name": NAME}, 0),
    # motion
    "goToXY": ({"x": EXPR, "y": EXPR}, 0),
    "changeXBy": ({"dx": EXPR}, 0),
    "changeYBy": ({"dy": EXPR}, 0),
    "glideSecsToXY": ({"secs": EXPR, "x": EXPR, "y": EXPR}, 0),
    "pointInDirection": ({"direction": EXPR}, 0),
    "ifOnEdgeBounce": ({}, 0),
    "moveSteps": ({"steps": EXPR}, 0),
    # looks
    "sayForSecs": ({"message": EXPR, "secs": EXPR}, 0),
    "say": ({"message": EXPR}, 0),
    "show": ({}, 0),
    "hide": ({}, 0),
    # data
    "setVariable": ({"variable": NAME, "value": EXPR}, 0),
    "changeVariableBy": ({"variable": NAME, "value": EXPR}, 0),
    # sensing
    "askAndWait": ({"question": EXPR}, 0),
}

BINARY = {"a": EXPR, "b": EXPR}
EXPRESSIONS: dict[str, dict[str, str]] = {
    "literal": {"value": "literal"},
    "variable": {"name": NAME},
    "+": BINARY, "-": BINARY, "*": BINARY, "/": BINARY,
    "<": BINARY, ">": BINARY, "=": BINARY,
    "and": BINARY, "or": BINARY,
    "not": {"a": EXPR},
    "pickRandom": {"from": EXPR, "to": EXPR},
    "touchingSprite": {"sprite": NAME},
    "touchingEdge": {},
    "keyDown": {"key": NAME},
    "mouseDown": {},
    "mouseX": {},
    "mouseY": {},
    "distanceTo": {"sprite": NAME},
    "answer": {},
    "loudness": {},
    "xPosition": {},
    "yPosition": {},
    "direction": {},
}

HATS: dict[str, dict[str, type]] = {
    "greenFlag": {},
    "keyPressed": {"key": str},
    "spriteClicked": {},
    "stageClicked": {},
    "receiveMessage": {"message": str},
    "startAsClone": {},
    "loudnessGreater": {"threshold": float},
    "define": {"name": str},
}

# hats fired by the test harness rather than by the program itself
USER_EVENTS = frozenset({"greenFlag", "keyPressed", "spriteClicked", "stageClicked", "loudnessGreater"})

LOOPS = frozenset({"forever", "repeat", "repeatUntil"})
BRANCHES = frozenset({"if", "ifElse", "waitUntil"}) | LOOPS


class ValidationError(ValueError):
    """Raised for structurally invalid programs; ``path`` locates the problem."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class Expr:
    op: str
    args: dict[str, Any] = field(default_factory=dict)

    def walk(self) -> Iterator["Expr"]:
        yield self
        for value in self.args.values():
            if isinstance(value, Expr):
                yield from value.walk()


@dataclass(frozen=True)
class Block:
    id: str
    op: str
    args: dict[str, Any] = field(default_factory=dict)
    children: tuple[tuple["Block", ...], ...] = ()

    def expressions(self) -> Iterator[Expr]:
        for value in self.args.values():
            if isinstance(value, Expr):
                yield from value.walk()

    def walk(self) -> Iterator["Block"]:
        yield self
        for child in self.children:
            for block in child:
                yield from block.walk()


@dataclass(frozen=True)
class Hat:
    id: str
    event: str
    params: dict[str, Any] = field(default_factory=dict)

    @property
    def is_user_event(self) -> bool:
        return self.event in USER_EVENTS


@dataclass(frozen=True)
class Script:
    hat: Hat
    body: tuple[Block, ...] = ()

    def blocks(self) -> Iterator[Block]:
        for block in self.body:
            yield from block.walk()


@dataclass(frozen=True)
class SpriteDef:
    name: str
    x: float = 0.0
    y: float = 0.0
    width: float = 0.0
    height: float = 0.0
    visible: bool = True
    direction: float = 90.0
    scripts: tuple[Script, ...] = ()
    procedures: dict[str, Script] = field(default_factory=dict)
    is_stage: bool = False

    def all_scripts(self) -> Iterator[Script]:
        yield from self.scripts
        yield from self.procedures.values()


@dataclass(frozen=True)
class Program:
    stage: SpriteDef
    sprites: tuple[SpriteDef, ...] = ()
    variables: dict[str, Union[float, str]] = field(default_factory=dict)
    stage_width: float = STAGE_WIDTH
    stage_height: float = STAGE_HEIGHT
    name: str = "program"

    @property
    def targets(self) -> tuple[SpriteDef, ...]:
        """Stage first, then sprites in document order."""
        return (self.stage,) + self.sprites

    def sprite(self, name: str) -> SpriteDef:
        for sprite in self.sprites:
            if sprite.name == name:
                return sprite
        raise KeyError(name)

    def scripts(self) -> Iterator[tuple[SpriteDef, Script]]:
        """Event-handler scripts (procedures excluded) in document order."""
        for target in self.targets:
            for script in target.scripts:
                yield target, script

    def block_ids(self) -> list[str]:
        """Ids of every coverable block: hats, statements and procedure definitions."""
        ids = []
        for target in self.targets:
            for script in target.all_scripts():
                ids.append(script.hat.id)
                ids.extend(block.id for block in script.blocks())
        return ids

    @property
    def script_count(self) -> int:
        return sum(len(t.scripts) for t in self.targets)

    @property
    def block_count(self) -> int:
        return len(self.block_ids())


# ---------------------------------------------------------------------------
# parsing


class _Parser:
    def __init__(self, doc: dict):
        self.doc = doc
        self.taken: set[str] = set()
        self.counters: dict[str, int] = {}
        self._collect_ids(doc)

    def _collect_ids(self, node: Any) -> None:
        # explicit ids are reserved up front so generated ids never collide
        if isinstance(node, dict):
            if isinstance(node.get("id"), str) and ("op" in node or "event" in node or "body" in node):
                if node["id"] in self.taken:
                    raise ValidationError(f"duplicate block id {node['id']!r}")
                self.taken.add(node["id"])
            for value in node.values():
                self._collect_ids(value)
        elif isinstance(node, list):
            for value in node:
                self._collect_ids(value)

    def _new_id(self, owner: str, given: Any) -> str:
        if isinstance(given, str):
            return given
        n = self.counters.get(owner, 0)
        while True:
            candidate = f"{owner}.{n}"
            n += 1
            if candidate not in self.taken:
                break
        self.counters[owner] = n
        self.taken.add(candidate)
        return candidate

    def program(self) -> Program:
        doc = self.doc
        if not isinstance(doc, dict):
            raise ValidationError("program must be a JSON object")
        for key in ("stage", "sprites", "variables"):
            if key not in doc:
                raise ValidationError(f"missing key {key!r}")
        width = _number(doc.get("stageWidth", STAGE_WIDTH), "stageWidth")
        height = _number(doc.get("stageHeight", STAGE_HEIGHT), "stageHeight")
        if width <= 0 or height <= 0:
            raise ValidationError("stage dimensions must be positive", "stageWidth/stageHeight")
        variables = doc["variables"]
        if not isinstance(variables, dict):
            raise ValidationError("must be an object", "variables")
        for name, value in variables.items():
            if isinstance(value, bool) or not isinstance(value, (int, float, str)):
                raise ValidationError("initial value must be a number or string", f"variables.{name}")
        stage = self.sprite(doc["stage"] or {}, "stage", is_stage=True)
        if not isinstance(doc["sprites"], list):
            raise ValidationError("must be a list", "sprites")
        sprites = tuple(self.sprite(s, f"sprites[{i}]") for i, s in enumerate(doc["sprites"]))
        return Program(
            stage=stage,
            sprites=sprites,
            variables={k: (float(v) if not isinstance(v, str) else v) for k, v in variables.items()},
            stage_width=width,
            stage_height=height,
            name=str(doc.get("name", "program")),
        )

    def sprite(self, doc: dict, path: str, is_stage: bool = False) -> SpriteDef:
        if not isinstance(doc, dict):
            raise ValidationError("must be an object", path)
        name = doc.get("name", "Stage" if is_stage else None)
        if not isinstance(name, str) or not name:
            raise ValidationError("sprite needs a name", path)
        scripts = doc.get("scripts", [])
        if not isinstance(scripts, list):
            raise ValidationError("must be a list", f"{path}.scripts")
        procs_doc = doc.get("procedures", {})
        if not isinstance(procs_doc, dict):
            raise ValidationError("must be an object", f"{path}.procedures")
        parsed_scripts = tuple(
            self.script(s, name, f"{path}.scripts[{i}]") for i, s in enumerate(scripts)
        )
        procedures = {}
        for proc_name, body in procs_doc.items():
            ppath = f"{path}.procedures.{proc_name}"
            if isinstance(body, list):
                body = {"body": body}
            if not isinstance(body, dict):
                raise ValidationError("procedure must be a list or object", ppath)
            hat = Hat(self._new_id(name, body.get("id")), "define", {"name": proc_name})
            procedures[proc_name] = Script(hat, self.blocks(body.get("body", []), name, f"{ppath}.body"))
        sprite = SpriteDef(
            name=name,
            x=0.0 if is_stage else _number(doc.get("x", 0), f"{path}.x"),
            y=0.0 if is_stage else _number(doc.get("y", 0), f"{path}.y"),
            width=0.0 if is_stage else _number(doc.get("width", 0), f"{path}.width"),
            height=0.0 if is_stage else _number(doc.get("height", 0), f"{path}.height"),
            visible=bool(doc.get("visible", True)),
            direction=_number(doc.get("direction", 90), f"{path}.direction"),
            scripts=parsed_scripts,
            procedures=procedures,
            is_stage=is_stage,
        )
        if sprite.width < 0 or sprite.height < 0:
            raise ValidationError("width and height must be non-negative", path)
        return sprite

    def script(self, doc: dict, owner: str, path: str) -> Script:
        if not isinstance(doc, dict) or "hat" not in doc:
            raise ValidationError("script needs a hat", path)
        hat_doc = doc["hat"]
        if not isinstance(hat_doc, dict) or hat_doc.get("event") not in HATS or hat_doc["event"] == "define":
            raise ValidationError(f"unknown hat {hat_doc!r}", f"{path}.hat")
        event = hat_doc["event"]
        params = {}
        for pname, ptype in HATS[event].items():
            if pname not in hat_doc:
                raise ValidationError(f"hat {event} needs {pname!r}", f"{path}.hat")
            value = hat_doc[pname]
            params[pname] = _number(value, f"{path}.hat.{pname}") if ptype is float else str(value)
        hat = Hat(self._new_id(owner, hat_doc.get("id")), event, params)
        return Script(hat, self.blocks(doc.get("body", []), owner, f"{path}.body"))

    def blocks(self, docs: Any, owner: str, path: str) -> tuple[Block, ...]:
        if not isinstance(docs, list):
            raise ValidationError("must be a list of blocks", path)
        return tuple(self.block(d, owner, f"{path}[{i}]") for i, d in enumerate(docs))

    def block(self, doc: Any, owner: str, path: str) -> Block:
        if not isinstance(doc, dict) or doc.get("op") not in STATEMENTS:
            op = doc.get("op") if isinstance(doc, dict) else doc
            raise ValidationError(f"unknown opcode {op!r}", path)
        op = doc["op"]
        schema, n_children = STATEMENTS[op]
        block_id = self._new_id(owner, doc.get("id"))
        args = self.args(doc.get("args", {}), schema, f"{path}.args")
        children_doc = doc.get("children", [])
        if not isinstance(children_doc, list) or len(children_doc) > n_children:
            raise ValidationError(f"{op} takes {n_children} child lists", f"{path}.children")
        children_doc = list(children_doc) + [[]] * (n_children - len(children_doc))
        children = tuple(
            self.blocks(c, owner, f"{path}.children[{i}]") for i, c in enumerate(children_doc)
        )
        return Block(block_id, op, args, children)

    def args(self, doc: Any, schema: dict[str, str], path: str) -> dict[str, Any]:
        if not isinstance(doc, dict):
            raise ValidationError("args must be an object", path)
        extra = set(doc) - set(schema)
        if extra:
            raise ValidationError(f"unexpected arguments {sorted(extra)}", path)
        out = {}
        for name, kind in schema.items():
            if name not in doc:
                raise ValidationError(f"missing argument {name!r}", path)
            value = doc[name]
            if kind == NAME:
                if not isinstance(value, str):
                    raise ValidationError("must be a name", f"{path}.{name}")
                out[name] = value
            elif kind == "literal":
                out[name] = _literal(value, f"{path}.{name}")
            else:
                out[name] = self.expr(value, f"{path}.{name}")
        return out

    def expr(self, doc: Any, path: str) -> Expr:
        if isinstance(doc, dict):
            op = doc.get("op")
            if op not in EXPRESSIONS:
                raise ValidationError(f"unknown opcode {op!r}", path)
            return Expr(op, self.args(doc.get("args", {}), EXPRESSIONS[op], f"{path}.args"))
        return Expr("literal", {"value": _literal(doc, path)})


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError("must be a number", path)
    return float(value)


def _literal(value: Any, path: str) -> Union[float, str]:
    if isinstance(value, str):
        return value
    return _number(value, path)


def _validate_references(program: Program) -> None:
    sprite_names = [s.name for s in program.sprites]
    if len(set(sprite_names)) != len(sprite_names) or program.stage.name in sprite_names:
        raise ValidationError("duplicate sprite name", "sprites")
    received = {
        script.hat.params["message"]
        for _, script in program.scripts()
        if script.hat.event == "receiveMessage"
    }
    for target in program.targets:
        base = "stage" if target.is_stage else f"sprite {target.name}"
        for script in target.scripts:
            if target.is_stage and script.hat.event in ("spriteClicked", "startAsClone"):
                raise ValidationError(f"{script.hat.event} is not available on the stage", base)
            if not target.is_stage and script.hat.event == "stageClicked":
                raise ValidationError("stageClicked is only available on the stage", base)
        for script in target.all_scripts():
            for block in script.blocks():
                path = f"{base} block {block.id}"
                if block.op == "callProcedure" and block.args["name"] not in target.procedures:
                    raise ValidationError(f"undefined procedure {block.args['name']!r}", path)
                if block.op in ("broadcast", "broadcastAndWait") and block.args["message"] not in received:
                    raise ValidationError(f"no receiver for message {block.args['message']!r}", path)
                if block.op == "createCloneOf":
                    name = block.args["sprite"]
                    if name == MYSELF and target.is_stage:
                        raise ValidationError("the stage cannot clone itself", path)
                    if name != MYSELF and name not in sprite_names:
                        raise ValidationError(f"unknown sprite {name!r}", path)
                for expr in block.expressions():
                    if expr.op in ("touchingSprite", "distanceTo") and expr.args["sprite"] not in sprite_names:
                        raise ValidationError(f"unknown sprite {expr.args['sprite']!r}", path)


def load_program(doc: dict) -> Program:
    """Build and validate a Program from an already-decoded JSON object."""
    program = _Parser(doc).program()
    _validate_references(program)
    return program


def parse_program(text: str) -> Program:
    """Parse JSON program text. Raises ``json.JSONDecodeError`` or ValidationError."""
    return load_program(json.loads(text))


def read_program(path) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read())


BUNDLED = ("fig1", "pingpong", "fruit", "green", "empty")


def bundled_text(name: str) -> str:
    """Source of a program shipped with the package, by name (``.json`` optional)."""
    stem = name[:-5] if name.endswith(".json") else name
    if stem not in BUNDLED:
        raise FileNotFoundError(f"no bundled program named {name!r}")
    return resources.files("blockgen").joinpath("programs", stem + ".json").read_text(encoding="utf-8")


def bundled_program(name: str) -> Program:
    return parse_program(bundled_text(name))


# ---------------------------------------------------------------------------
# serialization


def _expr_json(expr: Expr) -> Any:
    if expr.op == "literal":
        return expr.args["value"]
    return {"op": expr.op, "args": {k: _arg_json(v) for k, v in expr.args.items()}}


def _arg_json(value: Any) -> Any:
    return _expr_json(value) if isinstance(value, Expr) else value


def _block_json(block: Block) -> dict:
    out = {"id": block.id, "op": block.op, "args": {k: _arg_json(v) for k, v in block.args.items()}}
    if block.children:
        out["children"] = [[_block_json(b) for b in child] for child in block.children]
    return out


def _sprite_json(sprite: SpriteDef) -> dict:
    out: dict[str, Any] = {"name": sprite.name}
    if not sprite.is_stage:
        out.update(x=sprite.x, y=sprite.y, width=sprite.width, height=sprite.height)
    out["visible"] = sprite.visible
    out["direction"] = sprite.direction
    out["scripts"] = [
        {"hat": {"id": s.hat.id, "event": s.hat.event, **s.hat.params},
         "body": [_block_json(b) for b in s.body]}
        for s in sprite.scripts
    ]
    out["procedures"] = {
        name: {"id": s.hat.id, "body": [_block_json(b) for b in s.body]}
        for name, s in sprite.procedures.items()
    }
    return out


def program_to_json(program: Program) -> dict:
    return {
        "name": program.name,
        "stage": _sprite_json(program.stage),
        "sprites": [_sprite_json(s) for s in program.sprites],
        "variables": dict(program.variables),
        "stageWidth": program.stage_width,
        "stageHeight": program.stage_height,
    }


def serialize_program(program: Program) -> str:
    return json.dumps(program_to_json(program), indent=2)


# ---------------------------------------------------------------------------
# static facts


@dataclass(frozen=True)
class StaticFacts:
    """Program features the event grammar is built from (document order, deduplicated)."""

    handled_keys: tuple[str, ...] = ()
    sensed_keys: tuple[str, ...] = ()
    clickable_sprites: tuple[str, ...] = ()
    stage_clickable: bool = False
    uses_answer: bool = False
    uses_ask: bool = False
    senses_mouse_down: bool = False
    senses_mouse_position: bool = False
    loudness_thresholds: tuple[float, ...] = ()
    delays: tuple[float, ...] = ()  # seconds
    string_literals: tuple[str, ...] = ()


_DELAY_ARGS = {"wait": "duration", "sayForSecs": "secs", "glideSecsToXY": "secs"}


def collect_static_facts(program: Program) -> StaticFacts:
    handled, sensed, clickable, thresholds, delays, strings = [], [], [], [], [], []
    stage_clickable = uses_answer = uses_ask = mouse_down = mouse_pos = False

    def add(seq: list, value: Any) -> None:
        if value not in seq:
            seq.append(value)

    for target in program.targets:
        for script in target.all_scripts():
            hat = script.hat
            if hat.event == "keyPressed":
                add(handled, hat.params["key"])
            elif hat.event == "spriteClicked":
                add(clickable, target.name)
            elif hat.event == "stageClicked":
                stage_clickable = True
            elif hat.event == "loudnessGreater":
                add(thresholds, hat.params["threshold"])
            for block in script.blocks():
                if block.op == "askAndWait":
                    uses_ask = True
                delay_arg = _DELAY_ARGS.get(block.op)
                if delay_arg is not None:
                    expr = block.args[delay_arg]
                    if expr.op == "literal" and isinstance(expr.args["value"], float) and expr.args["value"] > 0:
                        add(delays, expr.args["value"])
                for expr in block.expressions():
                    if expr.op == "keyDown":
                        add(sensed, expr.args["key"])
                    elif expr.op == "answer":
                        uses_answer = True
                    elif expr.op == "mouseDown":
                        mouse_down = True
                    elif expr.op in ("mouseX", "mouseY"):
                        mouse_pos = True
                    elif expr.op == "literal":
                        value = expr.args["value"]
                        if isinstance(value, str) and value:
                            add(strings, value)
    return StaticFacts(
        handled_keys=tuple(handled),
        sensed_keys=tuple(sensed),
        clickable_sprites=tuple(clickable),
        stage_clickable=stage_clickable,
        uses_answer=uses_answer,
        uses_ask=uses_ask,
        senses_mouse_down=mouse_down,
        senses_mouse_position=mouse_pos,
        loudness_thresholds=tuple(thresholds),
        delays=tuple(delays),
        string_literals=tuple(strings),
    )
