"""Finite scenario-tree market model and node-wise (rectangular) measure families.

A tree carries d-dimensional prices on every node. A family assigns each
non-terminal node a finite list of transition probability vectors over that
node's successors; a measure picks one vector per node. Processes living on
the tree are plain ``dict`` objects keyed by node id.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

PROB_TOL = 1e-12


class ModelError(ValueError):
    """Invariant violation in a tree, family, measure or payoff."""

    def __init__(self, message: str, node: str | None = None, rule: str | None = None):
        self.node = node
        self.rule = rule
        where = f"node {node!r}: " if node is not None else ""
        super().__init__(f"{where}{message}")


class LoadError(ValueError):
    """Model file cannot be read or has the wrong schema."""


@dataclass(frozen=True)
class Node:
    id: str
    t: int
    parent: str | None
    succ: tuple[str, ...]
    S: tuple[float, ...]
    dt: float | None = None


@dataclass(frozen=True, eq=False)
class ScenarioTree:
    horizon: int
    dim: int
    nodes: tuple[Node, ...]

    def __post_init__(self):
        _validate_tree(self)

    @cached_property
    def index(self) -> dict[str, Node]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def root(self) -> str:
        return next(n.id for n in self.nodes if n.parent is None)

    @cached_property
    def slices(self) -> list[list[str]]:
        """Node ids grouped by time, each slice in file order."""
        out: list[list[str]] = [[] for _ in range(self.horizon + 1)]
        for n in self.nodes:
            out[n.t].append(n.id)
        return out

    @cached_property
    def _prices(self) -> dict[str, np.ndarray]:
        out = {}
        for n in self.nodes:
            a = np.array(n.S, dtype=float)
            a.flags.writeable = False
            out[n.id] = a
        return out

    def __getitem__(self, node_id: str) -> Node:
        try:
            return self.index[node_id]
        except KeyError:
            raise ModelError("unknown node", node=node_id, rule="exists") from None

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.index

    def __len__(self) -> int:
        return len(self.nodes)

    def price(self, node_id: str) -> np.ndarray:
        return self._prices[node_id]

    def increments(self, node_id: str) -> np.ndarray:
        """Array of shape (#successors, d) holding S_succ - S_node."""
        n = self[node_id]
        s = self._prices[node_id]
        return np.array([self._prices[c] - s for c in n.succ]).reshape(len(n.succ), self.dim)

    def is_terminal(self, node_id: str) -> bool:
        return self[node_id].t == self.horizon

    @cached_property
    def nonterminal(self) -> list[str]:
        return [n.id for n in self.nodes if n.t < self.horizon]

    @cached_property
    def leaves(self) -> list[str]:
        return list(self.slices[self.horizon])

    def backward(self) -> Iterator[str]:
        """Non-terminal node ids, latest time slice first."""
        for t in range(self.horizon - 1, -1, -1):
            yield from self.slices[t]

    def path(self, node_id: str) -> list[str]:
        """Node ids from the root down to ``node_id`` inclusive."""
        out = [node_id]
        while (p := self[out[-1]].parent) is not None:
            out.append(p)
        return out[::-1]

    def ancestor_at(self, node_id: str, t: int) -> str:
        n = self[node_id]
        if t > n.t or t < 0:
            raise ModelError(f"no ancestor at time {t}", node=node_id, rule="ancestor")
        while n.t > t:
            n = self[n.parent]
        return n.id

    def subtree(self, node_id: str) -> list[str]:
        """All node ids in the subtree rooted at ``node_id`` (pre-order)."""
        out, stack = [], [node_id]
        self[node_id]
        while stack:
            i = stack.pop()
            out.append(i)
            stack.extend(reversed(self.index[i].succ))
        return out


def _validate_tree(tree: ScenarioTree) -> None:
    if tree.horizon < 1:
        raise ModelError("horizon must be >= 1", rule="horizon")
    if tree.dim < 1:
        raise ModelError("dim must be >= 1", rule="dim")
    ids = [n.id for n in tree.nodes]
    if len(set(ids)) != len(ids):
        dup = next(i for i in ids if ids.count(i) > 1)
        raise ModelError("duplicate node id", node=dup, rule="unique-id")
    index = {n.id: n for n in tree.nodes}
    roots = [n for n in tree.nodes if n.parent is None]
    if len(roots) != 1:
        raise ModelError(f"expected exactly one root, found {len(roots)}", rule="single-root")
    if roots[0].t != 0:
        raise ModelError("root must sit at t = 0", node=roots[0].id, rule="single-root")
    for n in tree.nodes:
        if not 0 <= n.t <= tree.horizon:
            raise ModelError(f"time {n.t} outside 0..{tree.horizon}", node=n.id, rule="time-range")
        if len(n.S) != tree.dim:
            raise ModelError(f"price has length {len(n.S)}, expected {tree.dim}", node=n.id, rule="dim")
        if not all(math.isfinite(x) for x in n.S):
            raise ModelError("non-finite price", node=n.id, rule="finite-price")
        if n.t < tree.horizon:
            if not n.succ:
                raise ModelError("non-terminal node without successors", node=n.id, rule="successors")
            if n.dt is None or not (n.dt > 0 and math.isfinite(n.dt)):
                raise ModelError("dt must be a positive real", node=n.id, rule="dt")
        elif n.succ:
            raise ModelError("terminal node with successors", node=n.id, rule="successors")
        if len(set(n.succ)) != len(n.succ):
            raise ModelError("repeated successor", node=n.id, rule="successors")
        for c in n.succ:
            child = index.get(c)
            if child is None:
                raise ModelError(f"unknown successor {c!r}", node=n.id, rule="successors")
            if child.parent != n.id:
                raise ModelError(f"successor {c!r} names parent {child.parent!r}", node=n.id, rule="parent-link")
            if child.t != n.t + 1:
                raise ModelError(f"successor {c!r} at time {child.t}", node=n.id, rule="successor-time")
        if n.parent is not None:
            p = index.get(n.parent)
            if p is None or n.id not in p.succ:
                raise ModelError("parent does not list this node", node=n.id, rule="parent-link")
    # reachability
    seen, stack = set(), [roots[0].id]
    while stack:
        i = stack.pop()
        seen.add(i)
        stack.extend(index[i].succ)
    if len(seen) != len(ids):
        lost = next(i for i in ids if i not in seen)
        raise ModelError("node not reachable from the root", node=lost, rule="connected")


def grow_tree(s0, horizon: int, branch, dt: float = 1.0) -> ScenarioTree:
    """Build a tree by expanding ``branch(t, S) -> list of successor prices``.

    Node ids are path labels: ``"r"`` for the root, ``"r.0.2"`` for the third
    successor of the first successor of the root.
    """
    s0 = np.atleast_1d(np.asarray(s0, dtype=float))
    d = s0.size
    nodes: list[Node] = []
    frontier = [("r", None, s0)]
    for t in range(horizon + 1):
        nxt = []
        for nid, parent, s in frontier:
            if t < horizon:
                kids = [np.atleast_1d(np.asarray(c, dtype=float)) for c in branch(t, s)]
                succ = tuple(f"{nid}.{i}" for i in range(len(kids)))
                nxt.extend((cid, nid, c) for cid, c in zip(succ, kids))
                nodes.append(Node(nid, t, parent, succ, tuple(map(float, s)), float(dt)))
            else:
                nodes.append(Node(nid, t, parent, (), tuple(map(float, s)), None))
        frontier = nxt
    return ScenarioTree(horizon, d, tuple(nodes))


def _check_vector(vec, k: int, node: str) -> tuple[float, ...]:
    v = tuple(float(x) for x in vec)
    if len(v) != k:
        raise ModelError(f"probability vector has length {len(v)}, node has {k} successors",
                         node=node, rule="vector-length")
    if any(not math.isfinite(x) or x < 0 for x in v):
        raise ModelError("probability vector has a negative or non-finite entry", node=node, rule="nonnegative")
    if abs(math.fsum(v) - 1.0) > PROB_TOL:
        raise ModelError(f"probabilities sum to {math.fsum(v)!r}, not 1", node=node, rule="sum-to-one")
    return v


@dataclass(frozen=True, eq=False)
class Measure:
    """One transition vector per non-terminal node."""

    selection: Mapping[str, tuple[float, ...]]

    def __getitem__(self, node_id: str) -> np.ndarray:
        return np.asarray(self.selection[node_id], dtype=float)

    def validate(self, tree: ScenarioTree, nodes: Sequence[str] | None = None) -> "Measure":
        for nid in (tree.nonterminal if nodes is None else nodes):
            if nid not in self.selection:
                raise ModelError("measure has no transition vector", node=nid, rule="total")
            _check_vector(self.selection[nid], len(tree[nid].succ), nid)
        return self

    def restrict(self, tree: ScenarioTree, node_id: str) -> "Measure":
        keep = [i for i in tree.subtree(node_id) if not tree.is_terminal(i)]
        return Measure({i: self.selection[i] for i in keep})


@dataclass(frozen=True, eq=False)
class MeasureFamily:
    """Rectangular family: a finite list of extreme transition vectors per node.

    ``local_sets`` covers exactly the non-terminal nodes of ``tree`` below
    ``anchor`` (the root unless the family was produced by :func:`condition`).
    """

    tree: ScenarioTree
    local_sets: Mapping[str, tuple[tuple[float, ...], ...]]
    anchor: str | None = None

    def __post_init__(self):
        tree = self.tree
        anchor = tree.root if self.anchor is None else self.anchor
        object.__setattr__(self, "anchor", anchor)
        expected = [i for i in tree.subtree(anchor) if not tree.is_terminal(i)]
        extra = set(self.local_sets) - set(expected)
        if extra:
            raise ModelError("local set for a node outside the family's domain",
                             node=sorted(extra)[0], rule="cover-once")
        clean = {}
        for nid in expected:
            if nid not in self.local_sets:
                raise ModelError("no local set", node=nid, rule="cover-once")
            ext = self.local_sets[nid]
            if len(ext) == 0:
                raise ModelError("empty local set", node=nid, rule="nonempty")
            k = len(tree[nid].succ)
            clean[nid] = tuple(_check_vector(v, k, nid) for v in ext)
        object.__setattr__(self, "local_sets", clean)

    def extremes(self, node_id: str) -> np.ndarray:
        return np.array(self.local_sets[node_id], dtype=float)

    @property
    def nodes(self) -> list[str]:
        return list(self.local_sets)

    def size(self) -> int:
        """Number of extreme selections (product of local set sizes)."""
        return math.prod(len(v) for v in self.local_sets.values())

    def extreme_measures(self) -> Iterator[Measure]:
        keys = list(self.local_sets)
        for combo in itertools.product(*(self.local_sets[k] for k in keys)):
            yield Measure(dict(zip(keys, combo)))

    def contains(self, measure: Measure, tol: float = PROB_TOL) -> bool:
        """True iff every selection of ``measure`` is one of the local extremes."""
        for nid, ext in self.local_sets.items():
            if nid not in measure.selection:
                return False
            v = np.asarray(measure.selection[nid], dtype=float)
            if not any(np.max(np.abs(v - np.asarray(e))) <= tol for e in ext):
                return False
        return True

    def first(self) -> Measure:
        return Measure({k: v[0] for k, v in self.local_sets.items()})


def condition(family: MeasureFamily, node: str) -> MeasureFamily:
    """Restrict ``family`` to the subtree rooted at ``node``."""
    tree = family.tree
    if node not in tree.subtree(family.anchor):
        raise ModelError("node outside the family's domain", node=node, rule="exists")
    keep = [i for i in tree.subtree(node) if i in family.local_sets]
    return MeasureFamily(tree, {i: family.local_sets[i] for i in keep}, anchor=node)


def paste(family: MeasureFamily, outer: Measure, t: int, kernel: Mapping[str, Measure]) -> Measure:
    """Use ``outer`` strictly before time ``t`` and ``kernel[a]`` below each time-t node ``a``."""
    tree = family.tree
    if not 0 <= t <= tree.horizon:
        raise ModelError(f"paste time {t} outside 0..{tree.horizon}", rule="time-range")
    sel: dict[str, tuple[float, ...]] = {}
    for nid in family.local_sets:
        nt = tree[nid].t
        if nt < t:
            if nid not in outer.selection:
                raise ModelError("outer measure has no vector", node=nid, rule="total")
            sel[nid] = tuple(outer.selection[nid])
        else:
            a = tree.ancestor_at(nid, t)
            if a not in kernel:
                raise ModelError(f"kernel has no measure for time-{t} node", node=a, rule="kernel-total")
            k = kernel[a]
            if nid not in k.selection:
                raise ModelError("kernel measure has no vector", node=nid, rule="kernel-total")
            sel[nid] = tuple(k.selection[nid])
    return Measure(sel).validate(tree, list(family.local_sets))


def path_probability(tree: ScenarioTree, measure: Measure, leaf: str) -> float:
    if not tree.is_terminal(leaf):
        raise ModelError("path probability needs a time-T node", node=leaf, rule="terminal")
    path = tree.path(leaf)
    prob = 1.0
    for a, b in zip(path[:-1], path[1:]):
        prob *= float(measure.selection[a][tree[a].succ.index(b)])
    return prob


def expectation(tree: ScenarioTree, measure: Measure, values: Mapping[str, float]) -> float:
    """Root expectation of a payoff defined on the leaves."""
    return math.fsum(path_probability(tree, measure, l) * values[l] for l in tree.leaves)


def check_process(tree: ScenarioTree, values: Mapping[str, float], nodes=None, name="process") -> dict:
    nodes = [n.id for n in tree.nodes] if nodes is None else nodes
    out = {}
    for nid in nodes:
        if nid not in values:
            raise ModelError(f"{name} undefined", node=nid, rule="total")
        v = values[nid]
        if not np.all(np.isfinite(v)):
            raise ModelError(f"{name} not finite", node=nid, rule="finite")
        out[nid] = v
    return out


# -- JSON ---------------------------------------------------------------

def _num(x) -> float | int:
    x = float(x)
    return int(x) if x.is_integer() and abs(x) < 2**53 else x


def model_to_dict(tree: ScenarioTree, family: MeasureFamily, payoff: Mapping[str, float]) -> dict:
    nodes = []
    for n in tree.nodes:
        rec = {"id": n.id, "t": n.t, "parent": n.parent, "succ": list(n.succ), "S": [_num(x) for x in n.S]}
        if n.dt is not None:
            rec["dt"] = _num(n.dt)
        nodes.append(rec)
    return {
        "kind": "tree_model",
        "horizon": tree.horizon,
        "dim": tree.dim,
        "nodes": nodes,
        "local_sets": {k: [[_num(x) for x in v] for v in ext] for k, ext in family.local_sets.items()},
        "payoff": {n.id: _num(payoff[n.id]) for n in tree.nodes},
    }


def dumps_model(tree: ScenarioTree, family: MeasureFamily, payoff: Mapping[str, float]) -> str:
    return json.dumps(model_to_dict(tree, family, payoff), indent=1)


def save_model(path, tree: ScenarioTree, family: MeasureFamily, payoff: Mapping[str, float]) -> None:
    Path(path).write_text(dumps_model(tree, family, payoff) + "\n")


def model_from_dict(doc: dict):
    if not isinstance(doc, dict) or doc.get("kind") != "tree_model":
        kind = doc.get("kind") if isinstance(doc, dict) else type(doc).__name__
        raise LoadError(f"expected kind 'tree_model', got {kind!r}")
    try:
        horizon, dim = int(doc["horizon"]), int(doc["dim"])
        nodes = []
        for rec in doc["nodes"]:
            dt = rec.get("dt")
            succ = tuple(str(s) for s in rec.get("succ", []))
            if dt is None and succ:
                dt = 1.0
            nodes.append(Node(str(rec["id"]), int(rec["t"]),
                              None if rec.get("parent") is None else str(rec["parent"]),
                              succ, tuple(float(x) for x in rec["S"]),
                              None if dt is None else float(dt)))
        local_sets = {str(k): tuple(tuple(float(x) for x in v) for v in ext)
                      for k, ext in doc["local_sets"].items()}
        payoff_raw = doc["payoff"]
    except (KeyError, TypeError, ValueError) as exc:
        raise LoadError(f"malformed tree_model document: {exc!r}") from exc
    tree = ScenarioTree(horizon, dim, tuple(nodes))
    family = MeasureFamily(tree, local_sets)
    payoff = {}
    for n in tree.nodes:
        if n.id not in payoff_raw:
            raise ModelError("payoff undefined", node=n.id, rule="payoff-total")
        v = float(payoff_raw[n.id])
        if not math.isfinite(v):
            raise ModelError("payoff not finite", node=n.id, rule="finite")
        payoff[n.id] = v
    return tree, family, payoff


def load_model(path):
    """Read a ``tree_model`` JSON file into (tree, family, payoff)."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise LoadError(f"cannot read {path}: {exc}") from exc
    return model_from_dict(doc)
