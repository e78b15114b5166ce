"""Generators of (tree, family) pairs: uncertain-volatility lattices and
discretized nonlinear-Levy trees."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .hedging_dual import polytope_vertices
from .market_model import LoadError, MeasureFamily, ScenarioTree, grow_tree


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class UVSpec:
    """Volatility interval [sigma_lo, sigma_hi] per sqrt(time) on a log-price lattice.

    Successors of S are S * exp(j * spacing) for j = -(M-1)/2 .. (M-1)/2 with
    M = move_grid; spacing defaults to sigma_hi * sqrt(dt).
    """

    sigma_lo: float
    sigma_hi: float
    steps: int
    dt: float
    s0: float
    move_grid: int = 3
    spacing: float | None = None

    def __post_init__(self):
        if not 0 < self.sigma_lo <= self.sigma_hi:
            raise SpecError("need 0 < sigma_lo <= sigma_hi")
        if self.steps < 1 or not self.dt > 0 or not self.s0 > 0:
            raise SpecError("steps >= 1, dt > 0 and s0 > 0 required")
        if self.move_grid < 3 or self.move_grid % 2 == 0:
            raise SpecError("move_grid must be an odd count >= 3")
        if self.spacing is not None and not self.spacing > 0:
            raise SpecError("spacing must be positive")

    @property
    def delta(self) -> float:
        return self.sigma_hi * math.sqrt(self.dt) if self.spacing is None else self.spacing

    @property
    def log_moves(self) -> np.ndarray:
        h = (self.move_grid - 1) // 2
        return np.arange(-h, h + 1) * self.delta

    @property
    def returns(self) -> np.ndarray:
        """Relative price increments exp(move) - 1."""
        return np.expm1(self.log_moves)


def _endpoint_vertex(r: np.ndarray, var: float) -> np.ndarray | None:
    """A vertex of {p >= 0: sum p = 1, sum p r = 0, sum p r^2 = var}.

    Among several vertices the one using the least extreme moves is kept.
    """
    A = np.vstack([np.ones_like(r), r, r * r])
    verts = polytope_vertices(A, np.array([1.0, 0.0, var]))
    if not verts:
        return None
    return min(verts, key=lambda p: (np.max(np.abs(r[p > 0])), tuple(-p)))


def uv_local_set(spec: UVSpec) -> tuple[tuple[float, ...], ...]:
    r = spec.returns
    out = []
    for sigma in (spec.sigma_lo, spec.sigma_hi):
        p = _endpoint_vertex(r, sigma * sigma * spec.dt)
        if p is None:
            raise SpecError(f"variance {sigma}^2 dt not attainable by a martingale on the move grid")
        t = tuple(float(x) for x in p)
        if t not in out:
            out.append(t)
    return tuple(out)


def uv_lattice(spec: UVSpec) -> tuple[ScenarioTree, MeasureFamily]:
    growth = np.exp(spec.log_moves)
    tree = grow_tree(spec.s0, spec.steps, lambda t, s: [s * g for g in growth], dt=spec.dt)
    local = uv_local_set(spec)
    return tree, MeasureFamily(tree, {nid: local for nid in tree.nonterminal})


@dataclass(frozen=True)
class LevyTriplet:
    b: float
    c: float
    jumps: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.c < 0:
            raise SpecError("diffusion c must be nonnegative")
        if any(rate < 0 for _, rate in self.jumps):
            raise SpecError("jump rates must be nonnegative")
        object.__setattr__(self, "jumps", tuple((float(s), float(r)) for s, r in self.jumps))


@dataclass(frozen=True)
class LevySpec:
    triplets: tuple[LevyTriplet, ...]
    dt: float
    steps: int
    s0: float

    def __post_init__(self):
        if not self.triplets:
            raise SpecError("at least one triplet required")
        if self.steps < 1 or not self.dt > 0:
            raise SpecError("steps >= 1 and dt > 0 required")
        object.__setattr__(self, "triplets", tuple(
            th if isinstance(th, LevyTriplet) else LevyTriplet(*th) for th in self.triplets))


def levy_weights(theta: LevyTriplet, dt: float) -> dict[float, float]:
    """One-step increment law: jumps get rate*dt on their size, the rest sits at
    b*dt, split evenly onto b*dt +- sqrt(c*dt) when c > 0."""
    law: dict[float, float] = {}
    jump_mass = 0.0
    for size, rate in theta.jumps:
        law[size] = law.get(size, 0.0) + rate * dt
        jump_mass += rate * dt
    rest = 1.0 - jump_mass
    if rest < 0:
        raise SpecError(f"dt = {dt} too large: jump weights exceed one")
    drift = theta.b * dt
    if theta.c > 0:
        sd = math.sqrt(theta.c * dt)
        for x in (drift - sd, drift + sd):
            law[x] = law.get(x, 0.0) + rest / 2
    else:
        law[drift] = law.get(drift, 0.0) + rest
    return law


def levy_step(spec: LevySpec):
    """Common increment grid and one probability vector per triplet."""
    laws = [levy_weights(th, spec.dt) for th in spec.triplets]
    grid: list[float] = []
    for x in sorted(x for law in laws for x in law):
        if not grid or abs(x - grid[-1]) > 1e-12:
            grid.append(x)
    vectors = []
    for law in laws:
        v = np.zeros(len(grid))
        for x, w in law.items():
            v[int(np.argmin(np.abs(np.array(grid) - x)))] += w
        t = tuple(float(x) for x in v)
        if t not in vectors:
            vectors.append(t)
    return np.array(grid), tuple(vectors)


def levy_tree(spec: LevySpec) -> tuple[ScenarioTree, MeasureFamily]:
    grid, vectors = levy_step(spec)
    tree = grow_tree(spec.s0, spec.steps, lambda t, s: [s + x for x in grid], dt=spec.dt)
    return tree, MeasureFamily(tree, {nid: vectors for nid in tree.nonterminal})


def moment_report(tree: ScenarioTree, family: MeasureFamily, spec=None) -> list[dict]:
    """Mean and variance of price increments per node and extreme.

    ``rel_*`` columns use increments divided by the node price. With a
    :class:`UVSpec`, ``target_var`` is the relative variance endpoint of each
    extreme; with a :class:`LevySpec`, ``target_mean`` is the drift b*dt of the
    matching triplet (extremes follow triplet order, duplicates removed).
    """
    rows = []
    for nid in tree.nonterminal:
        dS = tree.increments(nid)[:, 0]
        s = float(tree.price(nid)[0])
        for j, p in enumerate(family.extremes(nid)):
            mean = float(p @ dS)
            var = float(p @ (dS - mean) ** 2)
            row = {"node": nid, "extreme": j, "mean": mean, "var": var,
                   "rel_mean": mean / s if s else math.nan, "rel_var": var / (s * s) if s else math.nan}
            if isinstance(spec, UVSpec):
                sig = (spec.sigma_lo, spec.sigma_hi)[min(j, 1)]
                row["target_var"] = sig * sig * spec.dt
                row["var_dev"] = row["rel_var"] - row["target_var"]
                row["mean_dev"] = mean
            elif isinstance(spec, LevySpec):
                b = spec.triplets[min(j, len(spec.triplets) - 1)].b
                row["target_mean"] = b * spec.dt
                row["mean_dev"] = mean - b * spec.dt
            rows.append(row)
    return rows


# -- spec files --------------------------------------------------------------

def spec_from_dict(doc: dict):
    kind = doc.get("kind") if isinstance(doc, dict) else None
    try:
        if kind == "uv":
            return UVSpec(float(doc["sigma_lo"]), float(doc["sigma_hi"]), int(doc["steps"]),
                          float(doc["dt"]), float(doc["s0"]), int(doc.get("move_grid", 3)),
                          None if doc.get("spacing") is None else float(doc["spacing"]))
        if kind == "levy":
            trips = tuple(LevyTriplet(float(t["b"]), float(t["c"]),
                                      tuple((float(s), float(r)) for s, r in t.get("jumps", [])))
                          for t in doc["triplets"])
            return LevySpec(trips, float(doc["dt"]), int(doc["steps"]), float(doc["s0"]))
    except (KeyError, TypeError) as exc:
        raise LoadError(f"malformed {kind} spec: {exc!r}") from exc
    raise LoadError(f"expected kind 'uv' or 'levy', got {kind!r}")


def payoff_from_dict(tree: ScenarioTree, doc: dict | None) -> dict[str, float]:
    """Vanilla payoff on the first asset: {"type": "put"|"call", "strike": K}; put at s0 by default."""
    doc = doc or {}
    kind = doc.get("type", "put")
    K = float(doc.get("strike", tree.price(tree.root)[0]))
    sign = {"put": -1.0, "call": 1.0}.get(kind)
    if sign is None:
        raise LoadError(f"unknown payoff type {kind!r}")
    return {n.id: max(sign * (n.S[0] - K), 0.0) for n in tree.nodes}


def generate(doc: dict):
    """(tree, family, payoff) from a ``uv`` or ``levy`` spec document."""
    spec = spec_from_dict(doc)
    tree, family = uv_lattice(spec) if isinstance(spec, UVSpec) else levy_tree(spec)
    return tree, family, payoff_from_dict(tree, doc.get("payoff"))


def load_spec(path):
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise LoadError(f"cannot read {path}: {exc}") from exc
    return spec_from_dict(doc)
