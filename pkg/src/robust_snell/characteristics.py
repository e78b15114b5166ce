"""Grid-sampled semimartingale characteristics and the dominating-diffusion checks.

A triplet holds cumulative drift B, cumulative second characteristic C and the
cumulative jump activity K = int int (|x|^2 ^ 1) nu on a time grid. Absolute
continuity of measures is read per grid interval: an increment of the
dominated measure may only appear where the dominating one also increases.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linalg import det_sym, jacobi_eigh, pseudo_inverse

PSD_TOL = 1e-10
DET_TOL = 1e-12
ZERO_TOL = 1e-12


class TripletError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CharacteristicTriplet:
    grid: np.ndarray  # (N+1,)
    B: np.ndarray     # (N+1, d)
    C: np.ndarray     # (N+1, d, d)
    K: np.ndarray     # (N+1,)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        C = np.asarray(self.C, dtype=float)
        if C.ndim != 3 or C.shape[1] != C.shape[2]:
            raise TripletError("C must have shape (N+1, d, d)")
        d = C.shape[1]
        B = np.asarray(self.B, dtype=float).reshape(len(grid), d)
        K = np.asarray(self.K, dtype=float)
        if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0):
            raise TripletError("grid must be strictly increasing with at least two points")
        if len(C) != len(grid) or len(K) != len(grid):
            raise TripletError("B, C, K must have one entry per grid point")
        if not (np.all(np.isfinite(C)) and np.all(np.isfinite(K)) and np.all(np.isfinite(B))):
            raise TripletError("non-finite characteristic values")
        if np.max(np.abs(C[0])) > ZERO_TOL or abs(K[0]) > ZERO_TOL:
            raise TripletError("C_0 and K_0 must vanish")
        if np.any(np.diff(K) < -ZERO_TOL):
            raise TripletError("K must be non-decreasing")
        for i, dC in enumerate(np.diff(C, axis=0)):
            scale = max(1.0, np.max(np.abs(dC)))
            if np.max(np.abs(dC - dC.T)) > ZERO_TOL * scale:
                raise TripletError(f"interval {i}: increment of C is not symmetric")
            if jacobi_eigh(dC)[0][0] < -PSD_TOL * scale:
                raise TripletError(f"interval {i}: increment of C is not positive semidefinite")
        for name, val in (("grid", grid), ("B", B), ("C", C), ("K", K)):
            val.flags.writeable = False
            object.__setattr__(self, name, val)

    @property
    def dim(self) -> int:
        return self.C.shape[1]

    @property
    def intervals(self) -> int:
        return len(self.grid) - 1


@dataclass(frozen=True, eq=False)
class FactorizedDiffusion:
    A: np.ndarray  # (N+1,) cumulative trace
    c: np.ndarray  # (N, d, d) density per interval

    @property
    def dA(self) -> np.ndarray:
        return np.diff(self.A)


def factorize(triplet: CharacteristicTriplet) -> FactorizedDiffusion:
    """Write dC = c dA with A = Tr(C); c has trace one wherever dA > 0."""
    A = np.trace(triplet.C, axis1=1, axis2=2).astype(float)
    dA = np.diff(A)
    dC = np.diff(triplet.C, axis=0)
    c = np.zeros_like(dC)
    for i in range(len(dA)):
        if dA[i] > ZERO_TOL:
            c[i] = dC[i] / dA[i]
        elif np.max(np.abs(dC[i])) > ZERO_TOL:
            raise TripletError(f"interval {i}: trace increment vanishes but C moves")
    return FactorizedDiffusion(A, c)


def _jumps(triplet):
    return np.diff(triplet.K) > ZERO_TOL


def interval_dets(fact: FactorizedDiffusion) -> np.ndarray:
    return np.array([det_sym(ci) for ci in fact.c])


def _singular_threshold(ci: np.ndarray) -> float:
    return DET_TOL * max(1.0, float(np.max(np.abs(ci)))) ** len(ci)


def dominating_diffusion_intervals(fact: FactorizedDiffusion, triplet: CharacteristicTriplet) -> np.ndarray:
    dets = interval_dets(fact)
    ok = np.ones(len(dets), dtype=bool)
    for i, (jump, det, dA, ci) in enumerate(zip(_jumps(triplet), dets, fact.dA, fact.c)):
        if jump:
            ok[i] = det > _singular_threshold(ci) and dA > ZERO_TOL
    return ok


def dominating_diffusion(fact: FactorizedDiffusion, triplet: CharacteristicTriplet) -> bool:
    """Jump activity only where the diffusion density is invertible."""
    return bool(np.all(dominating_diffusion_intervals(fact, triplet)))


def componentwise_intervals(fact: FactorizedDiffusion, triplet: CharacteristicTriplet) -> np.ndarray:
    ok = np.ones(fact.c.shape[0], dtype=bool)
    for i, (jump, dA, ci) in enumerate(zip(_jumps(triplet), fact.dA, fact.c)):
        if jump:
            ok[i] = float(np.min(np.diag(ci))) * dA > ZERO_TOL
    return ok


def dominating_diffusion_componentwise(fact: FactorizedDiffusion, triplet: CharacteristicTriplet) -> bool:
    """Older per-coordinate notion: every diagonal density entry positive where jumps occur."""
    return bool(np.all(componentwise_intervals(fact, triplet)))


def equivalence_intervals(fact: FactorizedDiffusion, triplet: CharacteristicTriplet) -> np.ndarray:
    """(N, 5) boolean table of the five absolute-continuity conditions per interval.

    Columns: det > 0, det != 0, |det| > 0, det * dA dominating, |det| * dA dominating.
    """
    dets = interval_dets(fact)
    out = np.ones((len(dets), 5), dtype=bool)
    for i, (jump, det, dA, ci) in enumerate(zip(_jumps(triplet), dets, fact.dA, fact.c)):
        if not jump:
            continue
        thr = _singular_threshold(ci)
        has_trace = dA > ZERO_TOL
        out[i] = [
            det > thr and has_trace,
            not (-thr <= det <= thr) and has_trace,
            abs(det) > thr and has_trace,
            det * dA > thr * dA and has_trace,
            abs(det) * dA > thr * dA and has_trace,
        ]
    return out


def equivalence_suite(fact: FactorizedDiffusion, triplet: CharacteristicTriplet) -> tuple[bool, ...]:
    return tuple(bool(x) for x in np.all(equivalence_intervals(fact, triplet), axis=0))


def hedging_candidate(c_S, c_SY) -> np.ndarray:
    """Per-interval Z = pinv(c_S) c_SY."""
    c_S = [np.asarray(m, dtype=float) for m in c_S]
    c_SY = [np.asarray(v, dtype=float) for v in c_SY]
    if len(c_S) != len(c_SY):
        raise ValueError("c_S and c_SY must have equal length")
    return np.array([pseudo_inverse(m) @ v for m, v in zip(c_S, c_SY)])


def candidate_consistent(c_S, c_SY, Z, tol: float = 1e-9) -> np.ndarray:
    """Per-interval flag: c_S Z reproduces c_SY, i.e. c_SY lies in the range of c_S."""
    return np.array([np.max(np.abs(np.asarray(m) @ z - np.asarray(v)), initial=0.0) <= tol
                     for m, v, z in zip(c_S, c_SY, Z)])


def example_3_7_triplet(grid=(0.0, 1.0, 2.0)) -> CharacteristicTriplet:
    """B = 0, C_t = [[t, t], [t, t]], nu(dt, dx) = delta_(1,1)(dx) dt.

    The jump x = (1, 1) has |x|^2 = 2 > 1, so (|x|^2 ^ 1) = 1 and K_t = t.
    """
    g = np.asarray(grid, dtype=float)
    x = np.array([1.0, 1.0])
    rate = min(float(x @ x), 1.0)
    C = np.array([[[t, t], [t, t]] for t in g])
    return CharacteristicTriplet(g, np.zeros((len(g), 2)), C, rate * g)


def example_3_7() -> tuple[bool, bool]:
    """(componentwise notion holds, determinant notion holds) for the counterexample."""
    trip = example_3_7_triplet()
    fact = factorize(trip)
    return dominating_diffusion_componentwise(fact, trip), dominating_diffusion(fact, trip)


# -- files -----------------------------------------------------------------

def triplet_from_dict(doc) -> CharacteristicTriplet:
    if not isinstance(doc, dict) or doc.get("kind") != "characteristics":
        kind = doc.get("kind") if isinstance(doc, dict) else type(doc).__name__
        raise TripletError(f"expected kind 'characteristics', got {kind!r}")
    try:
        return CharacteristicTriplet(np.array(doc["grid"], dtype=float), np.array(doc["B"], dtype=float),
                                     np.array(doc["C"], dtype=float), np.array(doc["K"], dtype=float))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, TripletError):
            raise
        raise TripletError(f"malformed characteristics document: {exc!r}") from exc


def triplet_to_dict(trip: CharacteristicTriplet) -> dict:
    return {"kind": "characteristics", "grid": trip.grid.tolist(), "B": trip.B.tolist(),
            "C": trip.C.tolist(), "K": trip.K.tolist()}


def load_triplet(path) -> CharacteristicTriplet:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise TripletError(f"cannot read {path}: {exc}") from exc
    return triplet_from_dict(doc)


def characteristics_report(trip: CharacteristicTriplet) -> dict:
    fact = factorize(trip)
    dets = interval_dets(fact)
    new = dominating_diffusion_intervals(fact, trip)
    old = componentwise_intervals(fact, trip)
    five = equivalence_intervals(fact, trip)
    rows = [{"det": float(dets[i]), "trace": float(fact.dA[i]), "dd_new": bool(new[i]),
             "dd_old": bool(old[i]), "five_way": [bool(x) for x in five[i]]}
            for i in range(trip.intervals)]
    return {"per_interval": rows,
            "overall": {"dd_new": bool(np.all(new)), "dd_old": bool(np.all(old)),
                        "five_way_agree": bool(np.all(five == five[:, :1]))}}
