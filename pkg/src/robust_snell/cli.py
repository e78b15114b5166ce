"""``robust-snell`` command line: price, hedge, duality, penalize, characteristics.

Every command prints one JSON document ``{"status", "payload", "timing_ms"}``
(plus ``"code"``/``"message"`` on error) and exits with

    0 ok, 2 load/validation, 3 numerical, 4 node arbitrage, 5 internal invariant breach.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import characteristics as ch
from .hedging_dual import (ArbitrageError, EquivalenceWarning, UnsaturatedFamilyWarning,
                           is_saturated, saturate, superhedge, verify_superhedge)
from .market_model import LoadError, Measure, MeasureFamily, ModelError, model_from_dict
from .model_families import SpecError, generate
from .rbsde_penalization import penalization_gap, penalized_snell
from .snell_aggregator import (DEFAULT_CAP, BruteForceCapError, brute_force_value, classical_snell,
                               optimal_exercise, robust_snell)

EXIT_OK, EXIT_LOAD, EXIT_NUMERIC, EXIT_ARBITRAGE, EXIT_INTERNAL = 0, 2, 3, 4, 5


class CommandError(Exception):
    def __init__(self, exit_code: int, code: str, message: str):
        super().__init__(message)
        self.exit_code, self.code, self.message = exit_code, code, message


@dataclass
class CommandResult:
    status: str
    payload: dict = field(default_factory=dict)
    timing_ms: float = 0.0
    code: str | None = None
    message: str | None = None
    exit_code: int = EXIT_OK

    def to_json(self) -> dict:
        out = {"status": self.status, "payload": self.payload}
        if self.status == "error":
            out["code"] = self.code
            out["message"] = self.message
        out["timing_ms"] = round(self.timing_ms, 3)
        return out


def _clean(obj):
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=1)


# -- inputs --------------------------------------------------------------------

def _resolve(path: str) -> Path:
    """``@name`` refers to a fixture bundled with the package."""
    if path.startswith("@"):
        return Path(str(resources.files("robust_snell") / "data" / f"{path[1:]}.json"))
    return Path(path)


def _read_json(path: str):
    try:
        return json.loads(_resolve(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CommandError(EXIT_LOAD, "E_LOAD", f"cannot read {path}: {exc}") from None


def _load_tree_model(path: str):
    doc = _read_json(path)
    kind = doc.get("kind") if isinstance(doc, dict) else None
    try:
        if kind in ("uv", "levy"):
            return generate(doc)
        return model_from_dict(doc)
    except LoadError as exc:
        raise CommandError(EXIT_LOAD, "E_SCHEMA", str(exc)) from None
    except (ModelError, SpecError) as exc:
        raise CommandError(EXIT_LOAD, "E_VALIDATION", str(exc)) from None


def _family(tree, given: MeasureFamily, which: str) -> MeasureFamily:
    if which == "given":
        return given
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EquivalenceWarning)
            return saturate(tree)
    except ArbitrageError as exc:
        raise CommandError(EXIT_ARBITRAGE, "E_ARBITRAGE", str(exc)) from None


def select_measure(family: MeasureFamily, selector: str) -> Measure:
    """``first``, ``last``, ``mean`` (centroid of the extremes) or an integer index (mod size)."""
    sel = {}
    for nid, ext in family.local_sets.items():
        arr = np.array(ext)
        if selector == "first":
            v = arr[0]
        elif selector == "last":
            v = arr[-1]
        elif selector == "mean":
            v = arr.mean(axis=0)
        else:
            try:
                v = arr[int(selector) % len(arr)]
            except ValueError:
                raise CommandError(EXIT_LOAD, "E_ARGS", f"unknown measure selector {selector!r}") from None
        sel[nid] = tuple(float(x) for x in v)
    return Measure(sel)


def _cap() -> int:
    raw = os.environ.get("ROBUST_SNELL_CAP")
    try:
        return int(float(raw)) if raw else DEFAULT_CAP
    except ValueError:
        raise CommandError(EXIT_LOAD, "E_ARGS", f"ROBUST_SNELL_CAP={raw!r} is not a number") from None


# -- commands ------------------------------------------------------------------

def cmd_price(args) -> dict:
    tree, given, xi = _load_tree_model(args.path)
    family = _family(tree, given, args.family)
    Y = robust_snell(tree, family, xi)
    rule = optimal_exercise(tree, Y, xi)
    boundary = [{"t": t, "nodes": [i for i in tree.slices[t] if rule.stop[i]]} for t in range(tree.horizon + 1)]
    payload = {"value": Y[tree.root], "family": args.family, "exercise_boundary": boundary,
               "stopping_nodes": rule.stopping_nodes(tree), "seed": args.seed}
    if args.measure is not None:
        m = select_measure(family, args.measure)
        payload["per_measure_values"] = {args.measure: classical_snell(tree, m, xi)[tree.root]}
    return payload


def _hedge_or_fail(tree, xi):
    try:
        return superhedge(tree, xi)
    except ArbitrageError as exc:
        raise CommandError(EXIT_ARBITRAGE, "E_ARBITRAGE", str(exc)) from None


def cmd_hedge(args) -> dict:
    tree, _, xi = _load_tree_model(args.path)
    if args.verify_only:
        doc = _read_json(args.verify_only)
        try:
            y0 = float(doc.get("y0", doc.get("price")))
            Z = {k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in doc["strategy"].items()}
            missing = [n for n in tree.nonterminal if n not in Z]
            if missing:
                raise KeyError(missing[0])
        except (KeyError, TypeError, ValueError) as exc:
            raise CommandError(EXIT_LOAD, "E_SCHEMA", f"bad strategy file: {exc!r}") from None
        return {"verified": verify_superhedge(tree, xi, y0, Z), "y0": y0, "seed": args.seed}
    report = _hedge_or_fail(tree, xi)
    if not verify_superhedge(tree, xi, report.price, report.strategy):
        raise CommandError(EXIT_INTERNAL, "E_INVARIANT", "emitted strategy fails pathwise verification")
    payload = report.to_json()
    payload["seed"] = args.seed
    return payload


def cmd_duality(args) -> dict:
    tree, given, xi = _load_tree_model(args.path)
    family = _family(tree, given, args.family)
    report = _hedge_or_fail(tree, xi)
    primal = robust_snell(tree, family, xi)[tree.root]
    dual = report.price
    gap = abs(dual - primal)
    saturated = is_saturated(tree, family)
    payload = {"primal": primal, "dual": dual, "gap": gap, "certified": gap <= 1e-8,
               "saturated": saturated, "family": args.family, "seed": args.seed}
    if primal > dual + 1e-9 and saturated:
        raise CommandError(EXIT_INTERNAL, "E_INVARIANT", "weak duality violated")
    if args.brute_force:
        try:
            bf = brute_force_value(tree, family, xi, cap=_cap())
        except BruteForceCapError as exc:
            payload["brute_force"] = None
            payload["brute_force_skipped"] = str(exc)
        else:
            payload["brute_force"] = bf
            payload["brute_force_agrees"] = abs(bf - primal) <= 1e-8
    return payload


def cmd_penalize(args) -> dict:
    tree, given, xi = _load_tree_model(args.path)
    family = _family(tree, given, args.family)
    measure = select_measure(family, args.measure or "first")
    try:
        ns = sorted(float(x) for x in args.n_list.split(","))
    except ValueError:
        raise CommandError(EXIT_LOAD, "E_ARGS", f"bad --n-list {args.n_list!r}") from None
    if not ns or ns[0] <= 0:
        raise CommandError(EXIT_LOAD, "E_ARGS", "--n-list needs positive penalties")
    rows, prev = [], None
    for n in ns:
        sol = penalized_snell(tree, measure, xi, n)
        gap = penalization_gap(tree, measure, xi, n)
        if prev is not None and any(sol.Y[k] < prev[k] - 1e-12 for k in sol.Y):
            raise CommandError(EXIT_INTERNAL, "E_INVARIANT", f"penalized values decrease at n={n:g}")
        if gap < -1e-12:
            raise CommandError(EXIT_INTERNAL, "E_INVARIANT", f"penalized value exceeds Snell at n={n:g}")
        prev = sol.Y
        rows.append({"n": n, "m": "", "ell": "", "k": "", "root_value": sol.Y[tree.root],
                     "gap": gap, "residual": 0.0})
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["n", "m", "ell", "k", "root_value", "gap", "residual"],
                       lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return {"measure": args.measure or "first", "rows": rows, "monotone": True,
            "csv": buf.getvalue(), "seed": args.seed}


def cmd_characteristics(args) -> dict:
    doc = _read_json(args.path)
    try:
        trip = ch.triplet_from_dict(doc)
        report = ch.characteristics_report(trip)
    except ch.TripletError as exc:
        raise CommandError(EXIT_LOAD, "E_SCHEMA", str(exc)) from None
    if not report["overall"]["five_way_agree"]:
        raise CommandError(EXIT_INTERNAL, "E_INVARIANT", "absolute-continuity conditions disagree")
    report["seed"] = args.seed
    return report


COMMANDS = {"price": cmd_price, "hedge": cmd_hedge, "duality": cmd_duality,
            "penalize": cmd_penalize, "characteristics": cmd_characteristics}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="robust-snell", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("path", help="model file (tree_model, uv or levy), or @name for a bundled fixture")
    p.add_argument("--family", choices=["given", "saturate"], default="given")
    p.add_argument("--measure", default=None, help="first | last | mean | <index>")
    p.add_argument("--n-list", default="1,10,100,1000")
    p.add_argument("--brute-force", action="store_true")
    p.add_argument("--verify-only", metavar="STRATEGY_PATH", default=None)
    p.add_argument("--out", default=None, help="also write the payload (CSV for penalize) here")
    p.add_argument("--seed", type=int, default=None, help="reserved; recorded in the payload")
    return p


def run(argv=None) -> CommandResult:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UnsaturatedFamilyWarning)
            payload = COMMANDS[args.command](args)
        res = CommandResult("ok", payload)
    except CommandError as exc:
        res = CommandResult("error", {}, code=exc.code, message=exc.message, exit_code=exc.exit_code)
    except (FloatingPointError, np.linalg.LinAlgError, BruteForceCapError, RuntimeError) as exc:
        res = CommandResult("error", {}, code="E_NUMERIC", message=str(exc), exit_code=EXIT_NUMERIC)
    res.timing_ms = (time.perf_counter() - start) * 1e3
    if args.out and res.status == "ok":
        body = res.payload["csv"] if args.command == "penalize" else dumps(res.payload) + "\n"
        Path(args.out).write_text(body)
    return res


def main(argv=None) -> int:
    res = run(argv)
    print(dumps(res.to_json()))
    return res.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
