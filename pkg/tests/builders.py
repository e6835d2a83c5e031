"""Tiny constructors for program documents used across the tests."""
from blockgen import load_program


def V(name):
    return {"op": "variable", "args": {"name": name}}


def op(opcode, **args):
    return {"op": opcode, "args": args}


def B(opcode, id=None, children=None, **args):
    d = {"op": opcode, "args": args}
    if id:
        d["id"] = id
    if children is not None:
        d["children"] = children
    return d


def hat(event, id=None, **params):
    d = dict(event=event, **params)
    if id:
        d["id"] = id
    return d


def script(h, *body):
    return {"hat": h, "body": list(body)}


def sprite(name, scripts=(), x=0, y=0, w=20, h=20, visible=True, procedures=None, direction=90):
    return {"name": name, "x": x, "y": y, "width": w, "height": h, "visible": visible,
            "direction": direction, "scripts": list(scripts), "procedures": procedures or {}}


def program(sprites=(), stage_scripts=(), variables=None, name="t"):
    return {"name": name, "stage": {"name": "Stage", "scripts": list(stage_scripts)},
            "sprites": list(sprites), "variables": variables or {}}


def build(*args, **kwargs):
    return load_program(program(*args, **kwargs))
