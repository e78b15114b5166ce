"""Superhedging of American claims on trees and the matching martingale side.

At each node the one-step problem

    minimize y   subject to   y + Z . dS_i >= V_i   for every successor i

is solved through its LP dual, the maximization of sum_i p_i V_i over the
local martingale polytope {p >= 0, sum p = 1, sum p_i dS_i = 0}. The primal
pair (y, Z) comes out as the simplex multipliers, the dual weights p as the
complementary-slackness certificate.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .market_model import MeasureFamily, ScenarioTree, check_process
from .simplex import linprog_eq
from .snell_aggregator import SUPERMART_TOL, robust_snell

HEDGE_TOL = 1e-9
CERT_TOL = 1e-8
VERTEX_TOL = 1e-10
DEDUP_TOL = 1e-9


class ArbitrageError(ValueError):
    """Zero lies outside the convex hull of the price increments at a node."""

    def __init__(self, message: str, node: str | None = None):
        self.node = node
        where = f"node {node!r}: " if node is not None else ""
        super().__init__(f"{where}{message}")


class UnsaturatedFamilyWarning(UserWarning):
    pass


class EquivalenceWarning(UserWarning):
    """A node's martingale polytope has no point with full support."""


@dataclass(frozen=True)
class NodeHedge:
    y: float
    Z: np.ndarray
    active: tuple[int, ...]
    weights: np.ndarray  # martingale weights certifying optimality


def _constraints(increments: np.ndarray):
    k, d = increments.shape
    A = np.vstack([np.ones((1, k)), increments.T])
    b = np.zeros(d + 1)
    b[0] = 1.0
    return A, b


def node_hedge(increments, targets) -> NodeHedge:
    dS = np.asarray(increments, dtype=float)
    V = np.asarray(targets, dtype=float)
    if dS.ndim == 1:
        dS = dS[:, None]
    if len(dS) == 0 or len(dS) != len(V):
        raise ValueError("increments and targets must be nonempty and of equal length")
    A, b = _constraints(dS)
    res = linprog_eq(V, A, b)
    if res.status == "infeasible":
        raise ArbitrageError("no martingale weights: the hedge LP is unbounded below")
    if res.status != "optimal":  # pragma: no cover - polytope is bounded
        raise RuntimeError(f"unexpected LP status {res.status}")
    y, Z = float(res.duals[0]), res.duals[1:].copy()
    slack = y + dS @ Z - V
    active = tuple(int(i) for i in np.flatnonzero(np.abs(slack) <= HEDGE_TOL * (1 + np.abs(V))))
    if not active:
        # numerically loose multipliers; pin the smallest slack
        active = (int(np.argmin(slack)),)
    return NodeHedge(y, Z, active, res.x)


# -- martingale polytope ---------------------------------------------------

def polytope_vertices(A, b, tol: float = VERTEX_TOL) -> list[np.ndarray]:
    """Vertices of {p >= 0 : A p = b} by support enumeration."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    m, k = A.shape
    rank = np.linalg.matrix_rank(A)
    out: list[np.ndarray] = []
    for size in range(1, min(rank, k) + 1):
        for support in itertools.combinations(range(k), size):
            sub = A[:, support]
            if np.linalg.matrix_rank(sub) < size:
                continue
            sol, *_ = np.linalg.lstsq(sub, b, rcond=None)
            if np.max(np.abs(sub @ sol - b)) > tol or np.min(sol) < -tol:
                continue
            p = np.zeros(k)
            p[list(support)] = np.clip(sol, 0.0, None)
            p /= p.sum()
            if not any(np.max(np.abs(p - q)) <= DEDUP_TOL for q in out):
                out.append(p)
    return out


def martingale_polytope_vertices(increments) -> list[np.ndarray]:
    dS = np.asarray(increments, dtype=float)
    if dS.ndim == 1:
        dS = dS[:, None]
    if len(dS) == 0:
        raise ValueError("increments must be nonempty")
    A, b = _constraints(dS)
    return polytope_vertices(A, b)


def saturate(tree: ScenarioTree) -> MeasureFamily:
    """Family whose local sets are all martingale-polytope vertices."""
    local = {}
    for nid in tree.nonterminal:
        verts = martingale_polytope_vertices(tree.increments(nid))
        if not verts:
            raise ArbitrageError("empty martingale polytope", node=nid)
        if np.min(np.mean(verts, axis=0)) <= 0:
            warnings.warn(f"node {nid!r}: no full-support martingale measure; saturated set "
                          "includes non-equivalent laws", EquivalenceWarning, stacklevel=2)
        local[nid] = tuple(tuple(float(x) for x in v) for v in verts)
    return MeasureFamily(tree, local)


def is_saturated(tree: ScenarioTree, family: MeasureFamily) -> bool:
    """True iff the local sets coincide (as sets) with the polytope vertices."""
    for nid in tree.nonterminal:
        verts = martingale_polytope_vertices(tree.increments(nid))
        ext = family.extremes(nid)
        if len(ext) != len(verts):
            return False
        for v in verts:
            if not np.any(np.max(np.abs(ext - v), axis=1) <= DEDUP_TOL):
                return False
    return True


# -- superhedging -----------------------------------------------------------

@dataclass
class HedgeReport:
    price: float
    strategy: dict[str, np.ndarray]
    consumption: dict[str, float]
    duality_gap: float
    certified: bool
    values: dict[str, float] = field(default_factory=dict)
    node_hedges: dict[str, NodeHedge] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "price": self.price,
            "gap": self.duality_gap,
            "certified": self.certified,
            "strategy": {k: [float(x) for x in v] for k, v in self.strategy.items()},
            "consumption": {k: float(v) for k, v in self.consumption.items()},
        }


def superhedge_values(tree: ScenarioTree, xi: Mapping[str, float]):
    """Backward recursion V = max(xi, one-step hedge cost); returns (V, hedges)."""
    xi = check_process(tree, xi, name="payoff")
    V = {l: float(xi[l]) for l in tree.leaves}
    hedges: dict[str, NodeHedge] = {}
    for nid in tree.backward():
        try:
            h = node_hedge(tree.increments(nid), [V[c] for c in tree[nid].succ])
        except ArbitrageError as exc:
            raise ArbitrageError(str(exc), node=nid) from None
        hedges[nid] = h
        V[nid] = max(float(xi[nid]), h.y)
    return V, hedges


def superhedge(tree: ScenarioTree, xi: Mapping[str, float]) -> HedgeReport:
    V, hedges = superhedge_values(tree, xi)
    strategy = {nid: hedges[nid].Z for nid in tree.nonterminal}
    consumption = {tree.root: 0.0}
    for nid in tree.nonterminal:
        for c, dS in zip(tree[nid].succ, tree.increments(nid)):
            consumption[c] = V[nid] + float(strategy[nid] @ dS) - V[c]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EquivalenceWarning)
        dual = robust_snell(tree, saturate(tree), xi)[tree.root]
    price = V[tree.root]
    gap = abs(price - dual)
    consumption = {n.id: consumption[n.id] for n in tree.nodes}
    return HedgeReport(price, strategy, consumption, gap, gap <= CERT_TOL, V, hedges)


def verify_superhedge(tree: ScenarioTree, xi: Mapping[str, float], y0: float,
                      Z: Mapping[str, np.ndarray], tol: float = HEDGE_TOL) -> bool:
    """Pathwise check y0 + (Z . S)_n >= xi_n at every node."""
    wealth = {tree.root: float(y0)}
    for t in range(tree.horizon):
        for nid in tree.slices[t]:
            z = np.atleast_1d(np.asarray(Z[nid], dtype=float))
            for c, dS in zip(tree[nid].succ, tree.increments(nid)):
                wealth[c] = wealth[nid] + float(z @ dS)
    return all(wealth[n.id] >= xi[n.id] - tol for n in tree.nodes)


def duality_gap(tree: ScenarioTree, xi: Mapping[str, float], family: MeasureFamily) -> float:
    """|superhedging price - robust Snell root under ``family``|.

    Only a saturated family carries the equality guarantee; others trigger an
    :class:`UnsaturatedFamilyWarning` and the gap is just reported.
    """
    if not is_saturated(tree, family):
        warnings.warn("family is not the saturated martingale family; gap may be positive",
                      UnsaturatedFamilyWarning, stacklevel=2)
    price = superhedge_values(tree, xi)[0][tree.root]
    return abs(price - robust_snell(tree, family, xi)[tree.root])


def optional_decomposition_check(tree: ScenarioTree, family: MeasureFamily, Y: Mapping[str, float],
                                 Z: Mapping[str, np.ndarray], tol: float = HEDGE_TOL) -> bool:
    """Y - Y_0 - Z.S non-increasing on every edge, for a robust supermartingale Y."""
    for nid in tree.nonterminal:
        nxt = np.array([Y[c] for c in tree[nid].succ])
        if np.max(family.extremes(nid) @ nxt) > Y[nid] + SUPERMART_TOL:
            return False
    for nid in tree.nonterminal:
        z = np.atleast_1d(np.asarray(Z[nid], dtype=float))
        for c, dS in zip(tree[nid].succ, tree.increments(nid)):
            if Y[c] - Y[nid] - float(z @ dS) > tol:
                return False
    return True


def node_arbitrage(tree: ScenarioTree) -> str | None:
    """Id of the first node (tree order) whose martingale polytope is empty."""
    for nid in tree.nonterminal:
        if not martingale_polytope_vertices(tree.increments(nid)):
            return nid
    return None
