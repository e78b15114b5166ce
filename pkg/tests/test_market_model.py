import itertools
import json

import numpy as np
import pytest

from robust_snell.market_model import (LoadError, Measure, MeasureFamily, ModelError, Node, ScenarioTree,
                                       condition, dumps_model, expectation, grow_tree, load_model,
                                       model_to_dict, paste, path_probability, save_model)
from robust_snell.characteristics import example_3_7_triplet, triplet_to_dict

from helpers import random_family, random_payoff, random_tree


def one_period(p=(1 / 3, 2 / 3)):
    tree = grow_tree(1.0, 1, lambda t, s: [2 * s, 0.5 * s])
    return tree, MeasureFamily(tree, {"r": (p,)})


def binomial2():
    return grow_tree(1.0, 2, lambda t, s: [2 * s, 0.5 * s])


def two_extreme_family(tree):
    return MeasureFamily(tree, {n: ((0.5, 0.5), (0.2, 0.8)) for n in tree.nonterminal})


def test_load_smallest_model(tmp_path):
    tree, fam = one_period()
    xi = {"r": 0.0, "r.0": 1.0, "r.1": 0.0}
    save_model(tmp_path / "m.json", tree, fam, xi)
    tree2, fam2, xi2 = load_model(tmp_path / "m.json")
    assert len(tree2) == 3
    assert len(fam2.local_sets) == 1
    assert xi2 == xi


def test_load_rejects_bad_probabilities(tmp_path):
    tree, fam = one_period()
    doc = model_to_dict(tree, fam, {n.id: 0.0 for n in tree.nodes})
    doc["local_sets"]["r"] = [[0.4, 0.5]]
    (tmp_path / "bad.json").write_text(json.dumps(doc))
    with pytest.raises(ModelError) as exc:
        load_model(tmp_path / "bad.json")
    assert exc.value.node == "r"
    assert exc.value.rule == "sum-to-one"


def test_loader_rejects_characteristics_file(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps(triplet_to_dict(example_3_7_triplet())))
    with pytest.raises(LoadError):
        load_model(tmp_path / "c.json")


def test_load_missing_file():
    with pytest.raises(LoadError):
        load_model("/definitely/not/here.json")


@pytest.mark.parametrize("mutate, rule", [
    (lambda d: d["nodes"][1].update(t=2), "successor-time"),
    (lambda d: d["nodes"][1].update(S=[float("nan")]), "finite-price"),
    (lambda d: d["nodes"][0].update(succ=[]), "successors"),
    (lambda d: d["payoff"].pop("r.1"), "payoff-total"),
    (lambda d: d["local_sets"]["r"][0].__setitem__(0, -0.1), "nonnegative"),
    (lambda d: d["local_sets"]["r"].__setitem__(0, [1.0]), "vector-length"),
])
def test_invariant_violations_name_node_and_rule(tmp_path, mutate, rule):
    tree, fam = one_period()
    doc = model_to_dict(tree, fam, {n.id: 0.0 for n in tree.nodes})
    mutate(doc)
    (tmp_path / "m.json").write_text(json.dumps(doc))
    with pytest.raises(ModelError) as exc:
        load_model(tmp_path / "m.json")
    assert exc.value.rule == rule


def test_unreachable_node_rejected():
    nodes = (Node("a", 0, None, ("b",), (1.0,), 1.0), Node("b", 1, "a", (), (1.0,)),
             Node("c", 1, "x", (), (1.0,)))
    with pytest.raises(ModelError):
        ScenarioTree(1, 1, nodes)


def test_round_trip_is_identity(tmp_path):
    rng = np.random.default_rng(3)
    for _ in range(10):
        tree = random_tree(rng, 3, dim=2)
        fam = random_family(rng, tree)
        xi = random_payoff(rng, tree)
        save_model(tmp_path / "a.json", tree, fam, xi)
        t2, f2, x2 = load_model(tmp_path / "a.json")
        assert t2.nodes == tree.nodes
        assert f2.local_sets == fam.local_sets
        assert x2 == xi
        assert dumps_model(t2, f2, x2) == dumps_model(tree, fam, xi)


def test_serialization_key_order():
    tree, fam = one_period()
    doc = json.loads(dumps_model(tree, fam, {n.id: 0.0 for n in tree.nodes}))
    assert list(doc) == ["kind", "horizon", "dim", "nodes", "local_sets", "payoff"]
    assert list(doc["nodes"][0]) == ["id", "t", "parent", "succ", "S", "dt"]


# -- path probabilities ----------------------------------------------------

def test_path_probability_chain():
    tree = grow_tree(1.0, 3, lambda t, s: [s])
    m = Measure({n: (1.0,) for n in tree.nonterminal})
    assert path_probability(tree, m, tree.leaves[0]) == 1.0


def test_path_probability_binomial():
    tree, fam = one_period()
    assert path_probability(tree, fam.first(), "r.0") == pytest.approx(1 / 3, abs=1e-15)


def test_path_probability_iid_two_period():
    tree = binomial2()
    m = Measure({n: (0.5, 0.5) for n in tree.nonterminal})
    probs = [path_probability(tree, m, l) for l in tree.leaves]
    assert probs == [0.25] * 4


def test_path_probability_rejects_inner_node():
    tree, fam = one_period()
    with pytest.raises(ModelError):
        path_probability(tree, fam.first(), "r")


def test_path_probabilities_sum_to_one():
    rng = np.random.default_rng(11)
    for _ in range(30):
        tree = random_tree(rng, int(rng.integers(1, 4)))
        fam = random_family(rng, tree)
        for m in itertools.islice(fam.extreme_measures(), 5):
            total = sum(path_probability(tree, m, l) for l in tree.leaves)
            assert abs(total - 1.0) <= 1e-12


# -- conditioning and pasting ------------------------------------------------

def test_condition_at_root_is_identity():
    tree = binomial2()
    fam = two_extreme_family(tree)
    assert condition(fam, tree.root).local_sets == fam.local_sets


def test_condition_depth_one():
    tree = binomial2()
    fam = two_extreme_family(tree)
    sub = condition(fam, "r.1")
    assert list(sub.local_sets) == ["r.1"]
    assert sub.local_sets["r.1"] == fam.local_sets["r.1"]


def test_condition_unknown_node():
    tree = binomial2()
    with pytest.raises(ModelError):
        condition(two_extreme_family(tree), "zzz")


def test_paste_with_own_restriction_returns_outer():
    tree = binomial2()
    fam = two_extreme_family(tree)
    outer = Measure({"r": (0.5, 0.5), "r.0": (0.2, 0.8), "r.1": (0.5, 0.5)})
    kernel = {a: outer.restrict(tree, a) for a in tree.slices[1]}
    out = paste(fam, outer, 1, kernel)
    assert dict(out.selection) == dict(outer.selection)


def test_paste_mixed_selection_tower_rule():
    tree = binomial2()
    fam = two_extreme_family(tree)
    first = Measure({n: (0.5, 0.5) for n in tree.nonterminal})
    second = Measure({n: (0.2, 0.8) for n in tree.nonterminal})
    kernel = {a: second.restrict(tree, a) for a in tree.slices[1]}
    mixed = paste(fam, first, 1, kernel)
    assert mixed.selection["r"] == (0.5, 0.5)
    assert mixed.selection["r.0"] == (0.2, 0.8)
    xi = {l: float(i + 1) ** 2 for i, l in enumerate(tree.leaves)}  # 1, 4, 9, 16
    tower = 0.5 * (0.2 * 1 + 0.8 * 4) + 0.5 * (0.2 * 9 + 0.8 * 16)
    assert expectation(tree, mixed, xi) == pytest.approx(tower, abs=1e-14)


def test_paste_errors():
    tree = binomial2()
    fam = two_extreme_family(tree)
    m = fam.first()
    with pytest.raises(ModelError):
        paste(fam, m, 5, {})
    with pytest.raises(ModelError):
        paste(fam, m, 1, {"r.0": m.restrict(tree, "r.0")})


def _two_period_two_branch():
    tree = binomial2()
    return tree, MeasureFamily(tree, {n: ((0.5, 0.5), (0.3, 0.7)) for n in tree.nonterminal})


def test_pasting_extremes_stays_in_family_exhaustive():
    tree, fam = _two_period_two_branch()
    measures = list(fam.extreme_measures())
    for t in range(tree.horizon + 1):
        anchors = tree.slices[t] if t < tree.horizon else []
        for outer in measures:
            for choice in itertools.product(measures, repeat=len(anchors)):
                kernel = {a: m.restrict(tree, a) for a, m in zip(anchors, choice)}
                assert fam.contains(paste(fam, outer, t, kernel))


def test_condition_then_paste_stays_in_family_exhaustive():
    tree, fam = _two_period_two_branch()
    for node in tree.slices[1]:
        sub = condition(fam, node)
        for inner in sub.extreme_measures():
            for outer in fam.extreme_measures():
                kernel = {a: (inner if a == node else outer.restrict(tree, a)) for a in tree.slices[1]}
                assert fam.contains(paste(fam, outer, 1, kernel))


def test_rectangularity_random_small_trees():
    # <= 3 periods, <= 3 successors, <= 3 extremes; sampled rather than fully enumerated
    rng = np.random.default_rng(5)
    for _ in range(20):
        tree = random_tree(rng, int(rng.integers(1, 4)))
        fam = random_family(rng, tree)
        ms = list(itertools.islice(fam.extreme_measures(), 50))
        for t in range(tree.horizon):
            for _ in range(5):
                outer = ms[rng.integers(len(ms))]
                kernel = {a: ms[rng.integers(len(ms))].restrict(tree, a) for a in tree.slices[t]}
                assert fam.contains(paste(fam, outer, t, kernel))


def test_non_extreme_measure_not_contained():
    tree, fam = one_period()
    assert not fam.contains(Measure({"r": (0.5, 0.5)}))
