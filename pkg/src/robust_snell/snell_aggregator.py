"""Classical and robust Snell envelopes on scenario trees.

The robust envelope is the node-wise recursion

    Y_n = max(xi_n, max_{p in local extremes} sum_i p_i Y_{succ_i})

which, for rectangular families, equals the double supremum over measures and
stopping rules. :func:`brute_force_value` computes that double supremum by
plain enumeration and serves as the independent check.
"""
from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .market_model import Measure, MeasureFamily, ScenarioTree, check_process

DEFAULT_CAP = 10**7
SUPERMART_TOL = 1e-9


class BruteForceCapError(RuntimeError):
    pass


def classical_snell(tree: ScenarioTree, measure: Measure, xi: Mapping[str, float]) -> dict[str, float]:
    xi = check_process(tree, xi, name="payoff")
    Y = {l: float(xi[l]) for l in tree.leaves}
    for nid in tree.backward():
        cont = float(measure[nid] @ np.array([Y[c] for c in tree[nid].succ]))
        Y[nid] = max(float(xi[nid]), cont)
    return Y


def robust_snell(tree: ScenarioTree, family: MeasureFamily, xi: Mapping[str, float]) -> dict[str, float]:
    xi = check_process(tree, xi, name="payoff")
    Y = {l: float(xi[l]) for l in tree.leaves}
    for nid in tree.backward():
        nxt = np.array([Y[c] for c in tree[nid].succ])
        cont = float(np.max(family.extremes(nid) @ nxt))
        Y[nid] = max(float(xi[nid]), cont)
    return Y


def check_supermartingale(tree: ScenarioTree, Y: Mapping[str, float], measure: Measure,
                          tol: float = SUPERMART_TOL) -> bool:
    for nid in tree.nonterminal:
        cont = float(measure[nid] @ np.array([Y[c] for c in tree[nid].succ]))
        if Y[nid] < cont - tol:
            return False
    return True


@dataclass(frozen=True)
class ExerciseRule:
    """Stop flags per node; every time-T node stops."""

    stop: Mapping[str, bool]

    def stopping_nodes(self, tree: ScenarioTree) -> list[str]:
        """First stopping node on each root-to-leaf path (deduplicated, tree order)."""
        out, stack = [], [tree.root]
        while stack:
            nid = stack.pop()
            if self.stop[nid]:
                out.append(nid)
            else:
                stack.extend(reversed(tree[nid].succ))
        return out

    def is_valid(self, tree: ScenarioTree) -> bool:
        return all(self.stop.get(l, False) for l in tree.leaves)


def optimal_exercise(tree: ScenarioTree, Y: Mapping[str, float], xi: Mapping[str, float],
                     rtol: float = 1e-9) -> ExerciseRule:
    """Stop at first contact of the envelope with the payoff; ties stop early."""
    stop = {}
    for n in tree.nodes:
        stop[n.id] = n.t == tree.horizon or abs(Y[n.id] - xi[n.id]) <= rtol * (1 + abs(xi[n.id]))
    return ExerciseRule(stop)


def rule_value(tree: ScenarioTree, family: MeasureFamily, xi: Mapping[str, float], rule: ExerciseRule) -> float:
    """max over the family of E[xi_tau] for one fixed exercise rule."""
    W = {}
    for t in range(tree.horizon, -1, -1):
        for nid in tree.slices[t]:
            if rule.stop[nid]:
                W[nid] = float(xi[nid])
            else:
                nxt = np.array([W[c] for c in tree[nid].succ])
                W[nid] = float(np.max(family.extremes(nid) @ nxt))
    return W[tree.root]


# -- brute force ----------------------------------------------------------

def _leaf_order(tree: ScenarioTree, nid: str) -> list[str]:
    return [i for i in tree.subtree(nid) if tree.is_terminal(i)]


def count_rules(tree: ScenarioTree, nid: str | None = None) -> int:
    """Number of distinct stopping times on the subtree at ``nid``."""
    nid = tree.root if nid is None else nid
    if tree.is_terminal(nid):
        return 1
    prod = 1
    for c in tree[nid].succ:
        prod *= count_rules(tree, c)
    return 1 + prod


def _rule_payoffs(tree: ScenarioTree, nid: str, xi) -> np.ndarray:
    """Rows: every stopping time on the subtree; columns: subtree leaves; entries xi at stop."""
    nleaf = len(_leaf_order(tree, nid))
    stop_now = np.full((1, nleaf), float(xi[nid]))
    if tree.is_terminal(nid):
        return stop_now
    blocks = [_rule_payoffs(tree, c, xi) for c in tree[nid].succ]
    rows = [np.concatenate(parts) for parts in itertools.product(*blocks)]
    return np.vstack([stop_now, np.array(rows)])


def _measure_probs(tree: ScenarioTree, nid: str, family: MeasureFamily) -> np.ndarray:
    """Rows: every extreme selection on the subtree; columns: leaf path probabilities."""
    if tree.is_terminal(nid):
        return np.ones((1, 1))
    blocks = [_measure_probs(tree, c, family) for c in tree[nid].succ]
    rows = []
    for p in family.local_sets[nid]:
        for parts in itertools.product(*blocks):
            rows.append(np.concatenate([w * part for w, part in zip(p, parts)]))
    return np.array(rows)


def brute_force_size(tree: ScenarioTree, family: MeasureFamily) -> int:
    return family.size() * count_rules(tree)


def brute_force_value(tree: ScenarioTree, family: MeasureFamily, xi: Mapping[str, float],
                      cap: int | None = None) -> float:
    """Exact max over all stopping rules and all extreme measures of E[xi_tau].

    The cap defaults to ``ROBUST_SNELL_CAP`` from the environment, else 10**7.
    """
    if cap is None:
        cap = int(os.environ.get("ROBUST_SNELL_CAP", DEFAULT_CAP))
    size = brute_force_size(tree, family)
    if size > cap:
        raise BruteForceCapError(f"{size} (measure, rule) pairs exceed the cap {cap}")
    xi = check_process(tree, xi, name="payoff")
    payoffs = _rule_payoffs(tree, tree.root, xi)
    probs = _measure_probs(tree, tree.root, family)
    best = -np.inf
    chunk = max(1, 2_000_000 // max(1, payoffs.shape[0]))
    for i in range(0, probs.shape[0], chunk):
        best = max(best, float(np.max(probs[i:i + chunk] @ payoffs.T)))
    return best
