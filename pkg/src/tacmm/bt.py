"""A small behavior-tree engine with memory composites.

Sequence and Selector remember which child they are on, so a Running child
is resumed on the next tick instead of re-ticking its finished siblings.
Parallel remembers which children have already resolved.  Whenever a
composite resolves it clears its memory (and its children's), so
re-ticking a resolved tree starts a fresh pass.
"""
from __future__ import annotations

import json
from enum import Enum


class Status(Enum):
    SUCCESS = "Success"
    FAILURE = "Failure"
    RUNNING = "Running"


class TreeError(ValueError):
    pass


class Blackboard:
    """String-keyed store whose value types are fixed at first insertion."""

    def __init__(self, **initial):
        self._data = {}
        for k, v in initial.items():
            self[k] = v

    def __setitem__(self, key, value):
        if not isinstance(key, str):
            raise TypeError("blackboard keys must be strings")
        if key in self._data and self._data[key] is not None and value is not None:
            old = type(self._data[key])
            if not isinstance(value, old):
                raise TypeError(f"blackboard key {key!r} holds {old.__name__}, "
                                f"got {type(value).__name__}")
        self._data[key] = value

    def __getitem__(self, key):
        return self._data[key]

    def __contains__(self, key):
        return key in self._data

    def get(self, key, default=None):
        return self._data.get(key, default)

    def keys(self):
        return self._data.keys()


class Node:
    kind = "Node"

    def __init__(self, name: str | None = None, children=()):
        self.name = name or self.kind
        self.children = list(children)

    def tick(self, bb) -> Status:
        raise NotImplementedError

    def reset(self):
        for c in self.children:
            c.reset()

    def state(self):
        """Hashable snapshot of all tick memory in the subtree."""
        return (self.kind, self._own_state(), tuple(c.state() for c in self.children))

    def _own_state(self):
        return None

    def params(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "children": [c.to_dict() for c in self.children],
             "params": self.params()}
        if self.name != self.kind:
            d["name"] = self.name
        return d


class _Composite(Node):
    def __init__(self, children, name=None):
        super().__init__(name, children)
        if not self.children:
            raise TreeError(f"{self.kind} needs at least one child")
        for c in self.children:
            if not isinstance(c, Node):
                raise TreeError(f"{self.kind} child {c!r} is not a Node")


class Sequence(_Composite):
    kind = "Sequence"

    def __init__(self, children, name=None):
        super().__init__(children, name)
        self.current = 0

    def tick(self, bb):
        while self.current < len(self.children):
            status = self.children[self.current].tick(bb)
            if status is Status.RUNNING:
                return status
            if status is Status.FAILURE:
                self.reset()
                return status
            self.current += 1
        self.reset()
        return Status.SUCCESS

    def reset(self):
        self.current = 0
        super().reset()

    def _own_state(self):
        return self.current


class Selector(_Composite):
    kind = "Selector"

    def __init__(self, children, name=None):
        super().__init__(children, name)
        self.current = 0

    def tick(self, bb):
        while self.current < len(self.children):
            status = self.children[self.current].tick(bb)
            if status is Status.RUNNING:
                return status
            if status is Status.SUCCESS:
                self.reset()
                return status
            self.current += 1
        self.reset()
        return Status.FAILURE

    def reset(self):
        self.current = 0
        super().reset()

    def _own_state(self):
        return self.current


class Parallel(_Composite):
    """Ticks every unresolved child each tick.  Succeeds once
    ``success_threshold`` children have succeeded (default: all of them) and
    fails as soon as that count is out of reach."""

    kind = "Parallel"

    def __init__(self, children, success_threshold: int | None = None, name=None):
        super().__init__(children, name)
        n = len(self.children)
        self.success_threshold = n if success_threshold is None else int(success_threshold)
        if not 1 <= self.success_threshold <= n:
            raise TreeError(f"Parallel threshold {self.success_threshold} outside [1, {n}]")
        self.results = [None] * n

    def tick(self, bb):
        for i, child in enumerate(self.children):
            if self.results[i] is None:
                status = child.tick(bb)
                if status is not Status.RUNNING:
                    self.results[i] = status
        n_success = sum(r is Status.SUCCESS for r in self.results)
        n_failure = sum(r is Status.FAILURE for r in self.results)
        if n_success >= self.success_threshold:
            self.reset()
            return Status.SUCCESS
        if n_failure > len(self.children) - self.success_threshold:
            self.reset()
            return Status.FAILURE
        return Status.RUNNING

    def reset(self):
        self.results = [None] * len(self.children)
        super().reset()

    def params(self):
        return {"success_threshold": self.success_threshold}

    def _own_state(self):
        return tuple(None if r is None else r.value for r in self.results)


class Action(Node):
    """Leaf calling ``fn(blackboard) -> Status``.

    ``callback`` is the id used when a tree is described in JSON.  A
    callable ``on_reset`` (if given) is called when the leaf is reset.
    """

    kind = "Action"

    def __init__(self, callback: str, fn, name=None, on_reset=None):
        super().__init__(name or callback)
        self.callback = callback
        self.fn = fn
        self.on_reset = on_reset

    def tick(self, bb):
        status = self.fn(bb)
        if not isinstance(status, Status):
            raise TypeError(f"action {self.callback!r} returned {status!r}, not a Status")
        return status

    def reset(self):
        if self.on_reset is not None:
            self.on_reset()

    def params(self):
        return {"callback": self.callback}

    def to_dict(self):
        d = super().to_dict()
        if self.name == self.callback:
            d.pop("name", None)
        return d


class Condition(Node):
    """Leaf testing ``fn(blackboard) -> bool``.  With ``wait=True`` a false
    result reports Running instead of Failure (a barrier that blocks)."""

    kind = "Condition"

    def __init__(self, callback: str, fn, wait: bool = False, name=None):
        super().__init__(name or callback)
        self.callback = callback
        self.fn = fn
        self.wait = wait

    def tick(self, bb):
        if self.fn(bb):
            return Status.SUCCESS
        return Status.RUNNING if self.wait else Status.FAILURE

    def params(self):
        return {"callback": self.callback, "wait": self.wait}

    def to_dict(self):
        d = super().to_dict()
        if self.name == self.callback:
            d.pop("name", None)
        return d


def tick(node: Node, blackboard) -> Status:
    return node.tick(blackboard)


def reset(node: Node) -> None:
    node.reset()


_COMPOSITES = {"Sequence": Sequence, "Selector": Selector, "Parallel": Parallel}


def from_dict(desc: dict, registry: dict) -> Node:
    """Build a tree from ``{kind, children, params}``; leaf callbacks are
    looked up by id in ``registry``."""
    if not isinstance(desc, dict) or "kind" not in desc:
        raise TreeError(f"node description must be a dict with 'kind': {desc!r}")
    kind = desc["kind"]
    params = dict(desc.get("params", {}))
    children = desc.get("children", [])
    name = desc.get("name")
    if kind in _COMPOSITES:
        built = [from_dict(c, registry) for c in children]
        if kind == "Parallel":
            return Parallel(built, params.get("success_threshold"), name=name)
        return _COMPOSITES[kind](built, name=name)
    if kind in ("Action", "Condition"):
        if children:
            raise TreeError(f"{kind} leaves take no children")
        cb = params.get("callback")
        if cb not in registry:
            raise TreeError(f"unknown callback id {cb!r}")
        if kind == "Action":
            return Action(cb, registry[cb], name=name)
        return Condition(cb, registry[cb], wait=bool(params.get("wait", False)), name=name)
    raise TreeError(f"unknown node kind {kind!r}")


def to_json(node: Node) -> str:
    return json.dumps(node.to_dict(), indent=2, sort_keys=True)


def from_json(text: str, registry: dict) -> Node:
    return from_dict(json.loads(text), registry)
