"""Random desk-scale trees and families shared by the test modules."""
import numpy as np

from robust_snell.market_model import MeasureFamily, Node, ScenarioTree
from robust_snell.snell_aggregator import brute_force_size


def random_tree(rng, horizon, max_succ=3, dim=1, martingale=False, min_succ=1, dt=1.0):
    """Tree with a random number of successors per node.

    With ``martingale=True`` the increments at each node are centred under a
    random full-support weight vector, so zero lies in their convex hull.
    """
    nodes = []
    frontier = [("r", None, rng.uniform(0.5, 2.0, size=dim))]
    for t in range(horizon + 1):
        nxt = []
        for nid, parent, s in frontier:
            if t == horizon:
                nodes.append(Node(nid, t, parent, (), tuple(map(float, s)), None))
                continue
            k = int(rng.integers(min_succ, max_succ + 1))
            X = rng.normal(scale=0.3, size=(k, dim))
            if martingale:
                w = rng.dirichlet(np.ones(k))
                X = X - w @ X
            succ = tuple(f"{nid}.{i}" for i in range(k))
            nodes.append(Node(nid, t, parent, succ, tuple(map(float, s)), dt))
            nxt.extend((c, nid, s + x) for c, x in zip(succ, X))
        frontier = nxt
    return ScenarioTree(horizon, dim, tuple(nodes))


def random_family(rng, tree, max_extremes=3):
    local = {}
    for nid in tree.nonterminal:
        k = len(tree[nid].succ)
        e = int(rng.integers(1, max_extremes + 1))
        vecs = []
        for _ in range(e):
            p = rng.dirichlet(np.ones(k))
            p[-1] = 1.0 - p[:-1].sum()
            if p[-1] < 0:
                p = np.full(k, 1.0 / k)
            vecs.append(tuple(p))
        local[nid] = tuple(vecs)
    return MeasureFamily(tree, local)


def random_payoff(rng, tree):
    return {n.id: float(rng.uniform(-1.0, 2.0)) for n in tree.nodes}


def put_payoff(tree, strike=None):
    k = tree.price(tree.root)[0] if strike is None else strike
    return {n.id: max(k - n.S[0], 0.0) for n in tree.nodes}


def small_cases(seed, count, cap=300_000):
    """(tree, family, payoff) triples with T <= 3, <= 3 successors, <= 3 extremes,
    resampled until the brute-force enumeration stays under ``cap``."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        tree = random_tree(rng, int(rng.integers(1, 4)))
        fam = random_family(rng, tree)
        if brute_force_size(tree, fam) > cap:
            continue
        out.append((tree, fam, random_payoff(rng, tree)))
    return out


def martingale_cases(seed, count, max_horizon=4):
    """Arbitrage-free trees with d in {1, 2}, T <= max_horizon, and a payoff."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        dim = int(rng.integers(1, 3))
        T = int(rng.integers(1, max_horizon + 1))
        tree = random_tree(rng, T, max_succ=3, dim=dim, martingale=True)
        if rng.random() < 0.5:
            xi = put_payoff(tree)
        else:
            xi = random_payoff(rng, tree)
        out.append((tree, xi))
    return out
