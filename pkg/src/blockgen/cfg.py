"""Interprocedural super-CFG and control dependence for block programs.

Control dependence is computed per script from post-dominators of the
intraprocedural graph (entry, artificial event nodes, blocks, exit).
Broadcast, clone and call edges of the super-CFG are then layered on top
as *invocation* dependences: a receive/clone event node or a procedure
definition depends on every block that can trigger it.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .program import BRANCHES, MYSELF, Block, Program, Script, SpriteDef

ENTRY = "entry"
EXIT = "exit"

_EVENT_LABELS = {
    "greenFlag": "flagclicked",
    "keyPressed": "keypressed:{key}",
    "spriteClicked": "thisspriteclicked:{sprite}",
    "stageClicked": "stageclicked",
    "receiveMessage": "broadcastreceived:{message}",
    "startAsClone": "startasclone:{sprite}",
    "loudnessGreater": "loudnessgreaterthan:{threshold:g}",
}


def event_node(hat_id: str) -> str:
    return f"ev:{hat_id}"


def _ret(root: str) -> str:
    return f"ret:{root}"


@dataclass
class Cfg:
    nodes: dict[str, str] = field(default_factory=dict)  # id -> label
    edges: list[tuple[str, str, str]] = field(default_factory=list)  # super-CFG
    intra_edges: list[tuple[str, str, str]] = field(default_factory=list)
    invocations: list[tuple[str, str, str]] = field(default_factory=list)  # (invoker, invoked root, label)
    event_nodes: list[str] = field(default_factory=list)
    hat_ids: list[str] = field(default_factory=list)
    define_ids: list[str] = field(default_factory=list)
    branch_nodes: set[str] = field(default_factory=set)
    unreachable: set[str] = field(default_factory=set)

    def successors(self, node: str, intra: bool = False) -> list[tuple[str, str]]:
        edges = self.intra_edges if intra else self.edges
        return [(dst, label) for src, dst, label in edges if src == node]

    def to_dot(self) -> str:
        lines = ["digraph cfg {"]
        for node, label in self.nodes.items():
            shape = "diamond" if node in self.event_nodes or node in self.branch_nodes else "box"
            if node in (ENTRY, EXIT):
                shape = "ellipse"
            lines.append(f'  "{node}" [label="{label}", shape={shape}];')
        for src, dst, label in self.edges:
            lines.append(f'  "{src}" -> "{dst}" [label="{label}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _block_label(block: Block) -> str:
    detail = ""
    for key in ("message", "sprite", "name", "variable"):
        if key in block.args and isinstance(block.args[key], str):
            detail = f":{block.args[key]}"
            break
    return f"{block.op}{detail}"


class _Builder:
    def __init__(self, program: Program):
        self.program = program
        self.cfg = Cfg()
        self.cfg.nodes[ENTRY] = ENTRY
        self.cfg.nodes[EXIT] = EXIT
        self.ends: dict[str, list[tuple[str, str]]] = {}  # root -> [(node, label)] flowing out
        self.calls: list[tuple[str, str, str]] = []  # (call block, successor, define id)
        self.waits: list[tuple[str, str, list[str]]] = []  # (block, successor, receive roots)
        self._hats = {}
        self.receivers: dict[str, list[Script]] = {}
        self.clone_hats: dict[str, list[Script]] = {}
        for target, script in program.scripts():
            if script.hat.event == "receiveMessage":
                self.receivers.setdefault(script.hat.params["message"], []).append(script)
            elif script.hat.event == "startAsClone":
                self.clone_hats.setdefault(target.name, []).append(script)

    def intra(self, src: str, dst: str, label: str) -> None:
        self.cfg.intra_edges.append((src, dst, label))

    def build(self) -> Cfg:
        cfg = self.cfg
        for target in self.program.targets:
            for script in target.scripts:
                self.script(target, script)
            for name, proc in target.procedures.items():
                self.procedure(target, proc)
        # resolve the per-root return placeholders
        intra, super_edges = [], []
        for src, dst, label in cfg.intra_edges:
            if dst.startswith("ret:"):
                root = dst[4:]
                self.ends.setdefault(root, []).append((src, label))
                intra.append((src, EXIT, label))
                if root not in cfg.define_ids:
                    super_edges.append((src, EXIT, label))
            else:
                intra.append((src, dst, label))
                super_edges.append((src, dst, label))
        cfg.intra_edges = intra
        call_blocks = {c[0] for c in self.calls} | {w[0] for w in self.waits}
        super_edges = [e for e in super_edges if not (e[0] in call_blocks and e[2] == "flow")]
        for block_id, succ, define_id in self.calls:
            super_edges.append((block_id, define_id, "call"))
            for end, _ in self.ends.get(define_id, ()):
                super_edges.append((end, succ, "return"))
        for block_id, succ, hats in self.waits:
            for hat in hats:
                for end, _ in self.ends.get(hat, ()):
                    super_edges.append((end, succ, "return"))
            if not hats:
                super_edges.append((block_id, succ, "flow"))
        for invoker, root, label in cfg.invocations:
            if label != "call":
                hat = root[3:]
                super_edges.append((invoker, hat, label))
        # entry->event edges are already among the intra edges; order by source
        order = {node: i for i, node in enumerate(cfg.nodes)}
        cfg.edges = sorted(super_edges, key=lambda e: order[e[0]])
        cfg.unreachable = set(cfg.nodes) - _reachable(cfg.edges, ENTRY)
        return cfg

    def script(self, target: SpriteDef, script: Script) -> None:
        cfg = self.cfg
        hat = script.hat
        ev = event_node(hat.id)
        label = _EVENT_LABELS[hat.event].format(sprite=target.name, **hat.params)
        cfg.nodes[ev] = label
        cfg.nodes[hat.id] = hat.event
        cfg.event_nodes.append(ev)
        cfg.hat_ids.append(hat.id)
        self._hats[ev] = hat
        for block in script.blocks():
            cfg.nodes[block.id] = _block_label(block)
        if hat.is_user_event:
            self.intra(ENTRY, ev, "event")
        self.intra(ev, hat.id, "true")
        self.intra(ev, EXIT, "false")
        first = self.sequence(target, script.body, _ret(hat.id))
        self.intra(hat.id, first, "flow")

    def procedure(self, target: SpriteDef, proc: Script) -> None:
        cfg = self.cfg
        define_id = proc.hat.id
        cfg.nodes[define_id] = f"define:{proc.hat.params['name']}"
        cfg.define_ids.append(define_id)
        for block in proc.blocks():
            cfg.nodes[block.id] = _block_label(block)
        first = self.sequence(target, proc.body, _ret(define_id))
        self.intra(define_id, first, "flow")

    def sequence(self, target: SpriteDef, blocks: Iterable[Block], succ: str) -> str:
        nxt = succ
        for block in reversed(tuple(blocks)):
            nxt = self.block(target, block, nxt)
        return nxt

    def block(self, target: SpriteDef, block: Block, succ: str) -> str:
        cfg = self.cfg
        b = block.id
        op = block.op
        cfg.nodes[b] = _block_label(block)
        if op in BRANCHES:
            cfg.branch_nodes.add(b)
        if op == "if":
            self.intra(b, self.sequence(target, block.children[0], succ), "true")
            self.intra(b, succ, "false")
        elif op == "ifElse":
            self.intra(b, self.sequence(target, block.children[0], succ), "true")
            self.intra(b, self.sequence(target, block.children[1], succ), "false")
        elif op == "repeat":
            self.intra(b, self.sequence(target, block.children[0], b), "true")
            self.intra(b, succ, "false")
        elif op == "repeatUntil":
            self.intra(b, succ, "true")
            self.intra(b, self.sequence(target, block.children[0], b), "false")
        elif op == "forever":
            self.intra(b, self.sequence(target, block.children[0], b), "true")
            # never taken; keeps post-dominance defined for the endless loop
            self.intra(b, EXIT, "false")
        elif op == "waitUntil":
            self.intra(b, succ, "true")
            # a condition that never holds blocks the thread for good
            self.intra(b, EXIT, "false")
        elif op in ("stopAll", "deleteThisClone"):
            self.intra(b, EXIT, "flow")
        else:
            self.intra(b, succ, "flow")
            if op in ("broadcast", "broadcastAndWait"):
                hats = [s.hat.id for s in self.receivers.get(block.args["message"], ())]
                for hat in hats:
                    cfg.invocations.append((b, event_node(hat), "broadcast"))
                if op == "broadcastAndWait":
                    self.waits.append((b, succ, hats))
            elif op == "createCloneOf":
                name = target.name if block.args["sprite"] == MYSELF else block.args["sprite"]
                for script in self.clone_hats.get(name, ()):
                    cfg.invocations.append((b, event_node(script.hat.id), "clone"))
            elif op == "callProcedure":
                define_id = target.procedures[block.args["name"]].hat.id
                cfg.invocations.append((b, define_id, "call"))
                self.calls.append((b, succ, define_id))
        return b


def _reachable(edges, start: str) -> set[str]:
    succ: dict[str, list[str]] = {}
    for src, dst, _ in edges:
        succ.setdefault(src, []).append(dst)
    seen = {start}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        for nxt in succ.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def build_super_cfg(program: Program) -> Cfg:
    return _Builder(program).build()


# ---------------------------------------------------------------------------
# post-dominance


def post_dominators(nodes: Iterable[str], edges, exit_node: str = EXIT) -> dict[str, set[str]]:
    """Iterative post-dominator sets; every node must reach ``exit_node``."""
    nodes = list(nodes)
    succ: dict[str, list[str]] = {n: [] for n in nodes}
    for src, dst, _ in edges:
        succ[src].append(dst)
    everything = set(nodes)
    pdom = {n: set(everything) for n in nodes}
    pdom[exit_node] = {exit_node}
    changed = True
    while changed:
        changed = False
        for n in nodes:
            if n == exit_node:
                continue
            if succ[n]:
                new = set.intersection(*(pdom[s] for s in succ[n]))
            else:
                new = set()
            new = new | {n}
            if new != pdom[n]:
                pdom[n] = new
                changed = True
    return pdom


def immediate_post_dominators(pdom: dict[str, set[str]]) -> dict[str, Optional[str]]:
    ipdom: dict[str, Optional[str]] = {}
    for n, doms in pdom.items():
        strict = doms - {n}
        ipdom[n] = None
        for d in strict:
            if len(pdom[d]) == len(doms) - 1:
                ipdom[n] = d
                break
    return ipdom


@dataclass
class ControlDependence:
    parents: dict[str, list[tuple[str, str]]]

    def depends_on(self, node: str, parent: str, label: Optional[str] = None) -> bool:
        return any(p == parent and (label is None or l == label) for p, l in self.parents.get(node, ()))

    def chain(self, node: str) -> tuple[tuple[str, str], ...]:
        """Shortest dependence chain from ``node`` up to the entry node."""
        prev: dict[str, tuple[str, tuple[str, str]]] = {}
        queue = deque([node])
        seen = {node}
        while queue:
            current = queue.popleft()
            if current == ENTRY:
                out = []
                while current != node:
                    child, edge = prev[current]
                    out.append(edge)
                    current = child
                return tuple(reversed(out))
            for parent, label in self.parents.get(current, ()):
                if parent not in seen:
                    seen.add(parent)
                    prev[parent] = (current, (parent, label))
                    queue.append(parent)
        return ()

    def ancestors(self, node: str) -> set[str]:
        seen: set[str] = set()
        stack = [node]
        while stack:
            for parent, _ in self.parents.get(stack.pop(), ()):
                if parent not in seen:
                    seen.add(parent)
                    stack.append(parent)
        return seen


def intraprocedural_dependences(nodes, edges) -> dict[str, list[tuple[str, str]]]:
    pdom = post_dominators(nodes, edges)
    ipdom = immediate_post_dominators(pdom)
    parents: dict[str, list[tuple[str, str]]] = {n: [] for n in nodes}
    for a, b, label in edges:
        if b in pdom[a] and b != a:
            continue
        runner: Optional[str] = b
        while runner is not None and runner != ipdom[a]:
            if (a, label) not in parents[runner]:
                parents[runner].append((a, label))
            runner = ipdom[runner]
    return parents


def control_dependencies(cfg: Cfg) -> ControlDependence:
    parents = intraprocedural_dependences(cfg.nodes, cfg.intra_edges)
    roots = set(cfg.event_nodes) | set(cfg.define_ids)
    # procedure bodies hang off their definition
    define_of: dict[str, str] = {}
    for define_id in cfg.define_ids:
        for node in _reachable([e for e in cfg.intra_edges if e[1] != EXIT], define_id):
            define_of.setdefault(node, define_id)
    for node, deps in parents.items():
        if node in (ENTRY, EXIT) or node in roots:
            continue
        if not [p for p, _ in deps if p != node] and node in define_of:
            deps.append((define_of[node], "call"))
    for invoker, root, label in cfg.invocations:
        parents[root].append((invoker, label))
    for root in roots:
        if not parents[root]:
            parents[root].append((ENTRY, "event"))
    parents.pop(EXIT, None)
    parents.pop(ENTRY, None)
    return ControlDependence(parents)
