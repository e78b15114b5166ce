import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robust_snell.market_model import Measure, MeasureFamily, grow_tree
from robust_snell.rbsde_penalization import (GeneratorSpec, contraction_ratios, ladder_value,
                                             mollify_generator, penalization_gap, penalized_snell,
                                             picard_iterates, picard_solve, truncate_terminal,
                                             truncated_generator)
from robust_snell.snell_aggregator import classical_snell

from helpers import random_family, random_payoff, random_tree


def fixture_node():
    """One step, dt = 1, continuation value 0.5, payoff 1 at the root."""
    tree = grow_tree(1.0, 1, lambda t, s: [s + 1, s - 1])
    return tree, Measure({"r": (0.5, 0.5)}), {"r": 1.0, "r.0": 1.0, "r.1": 0.0}


def desk_cases(seed, count, dt=1.0, nonneg=False):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        tree = random_tree(rng, int(rng.integers(1, 5)), dt=dt)
        m = random_family(rng, tree, max_extremes=1).first()
        xi = random_payoff(rng, tree)
        if nonneg:
            xi = {k: abs(v) for k, v in xi.items()}
        out.append((tree, m, xi))
    return out


# -- closed-form penalization -------------------------------------------------

def test_fixture_value():
    tree, m, xi = fixture_node()
    sol = penalized_snell(tree, m, xi, 9)
    assert sol.Y["r"] == 0.95
    assert sol.K["r"] == pytest.approx(9 * 0.05, abs=1e-15)
    assert penalization_gap(tree, m, xi, 9) == pytest.approx(0.05, abs=1e-15)


def test_fixture_large_n_limit():
    tree, m, xi = fixture_node()
    vals = [penalized_snell(tree, m, xi, n).Y["r"] for n in (1e2, 1e4, 1e6, 1e8)]
    assert np.all(np.diff(vals) > 0)
    assert 1.0 - vals[-1] == pytest.approx(0.5 / (1 + 1e8), rel=1e-6)


def test_inactive_penalty():
    rng = np.random.default_rng(0)
    tree = random_tree(rng, 3)
    m = random_family(rng, tree, max_extremes=1).first()
    xi = {n.id: (0.0 if n.t < tree.horizon else float(rng.uniform(0, 1))) for n in tree.nodes}
    sol = penalized_snell(tree, m, xi, 50)
    assert sol.Y == classical_snell(tree, m, xi)
    assert all(v == 0.0 for v in sol.K.values())


def test_constant_payoff_zero_gap():
    tree, m, _ = fixture_node()
    for n in (1, 10, 100):
        assert penalization_gap(tree, m, {k: 3.0 for k in ("r", "r.0", "r.1")}, n) == 0.0


def test_rejects_nonpositive_penalty():
    tree, m, xi = fixture_node()
    with pytest.raises(ValueError):
        penalized_snell(tree, m, xi, 0)


def test_monotone_in_n_dominated_and_skorokhod():
    for tree, m, xi in desk_cases(1, 60):
        snell = classical_snell(tree, m, xi)
        prev = None
        for n in (0.5, 1, 10, 100, 1e4):
            sol = penalized_snell(tree, m, xi, n)
            assert all(sol.Y[k] <= snell[k] + 1e-12 for k in snell)
            assert all(v >= 0 for v in sol.K.values())
            for nid in tree.nonterminal:
                E = m[nid] @ [sol.Y[c] for c in tree[nid].succ]
                if sol.K[nid] > 0:
                    assert xi[nid] > E
            if prev is not None:
                assert all(sol.Y[k] >= prev[k] - 1e-12 for k in snell)
            prev = sol.Y
        assert penalization_gap(tree, m, xi, 1e4) <= 1e-3


def test_gap_nonnegative():
    for tree, m, xi in desk_cases(2, 30, dt=0.25):
        for n in (1, 7, 300):
            assert penalization_gap(tree, m, xi, n) >= -1e-12


# -- truncation and generators ----------------------------------------------------

@pytest.mark.parametrize("value, m, expected", [(5, 3, 3), (-5, 3, -3), (0.2, 3, 0.2)])
def test_truncate(value, m, expected):
    assert truncate_terminal(value, m) == expected


def test_spec_invariants():
    with pytest.raises(ValueError):
        GeneratorSpec(1.0, 1.0, 0.0, 0.1)
    with pytest.raises(ValueError):
        GeneratorSpec(1.0, 1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        GeneratorSpec(1.0, 2.0, 1.0, 0.1, R=2.5)
    assert GeneratorSpec(1.0, 2.0, 1.0, 0.1).R == 3.0


def grid_oracle(spec, xi_node, y):
    """Direct minimum over every grid point."""
    q = spec.grid
    f = truncated_generator(spec.n, spec.m, xi_node)(q)
    return np.min(spec.ell * np.abs(np.asarray(y)[..., None] - q) + f, axis=-1)


@settings(max_examples=150, deadline=None)
@given(n=st.floats(0.1, 20), m=st.floats(0.5, 5), ell=st.floats(0.1, 30),
       h=st.sampled_from([0.05, 0.1, 0.25]), xi=st.floats(-4, 4),
       y=st.lists(st.floats(-8, 8), min_size=1, max_size=8))
def test_mollifier_matches_full_grid_minimum(n, m, ell, h, xi, y):
    spec = GeneratorSpec(n, m, ell, h)
    got = mollify_generator(spec, xi)(np.array(y))
    np.testing.assert_allclose(got, grid_oracle(spec, xi, np.array(y)), atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(n=st.floats(0.1, 10), extra=st.floats(0, 10), m=st.floats(0.5, 5),
       h=st.sampled_from([0.01, 0.1]), xi=st.floats(-3, 3), y=st.floats(-3, 3), y2=st.floats(-3, 3))
def test_mollifier_bounds_when_ell_dominates(n, extra, m, h, xi, y, y2):
    ell = n + extra
    spec = GeneratorSpec(n, m, ell, h, R=m + 5)
    f = truncated_generator(n, m, xi)
    fl = mollify_generator(spec, xi)
    # on grid points the inf-convolution reproduces f exactly
    q = round(y / h) * h
    assert f(q) - ell * h <= fl(q) + 1e-12
    assert fl(q) <= f(q) + 1e-12
    # off the grid: f <= f^ell <= f + (ell + n) h
    assert float(f(y)) - 1e-12 <= fl(y) <= float(f(y)) + (ell + n) * h + 1e-12
    assert abs(fl(y) - fl(y2)) <= ell * abs(y - y2) + 1e-12
    assert abs(fl(0.0)) <= m + ell * h + 1e-12


def test_mollifier_near_dense_grid_recovers_generator():
    spec = GeneratorSpec(5.0, 20.0, 8.0, 1e-6)
    f, fl = truncated_generator(5.0, 20.0, 1.3), mollify_generator(spec, 1.3)
    ys = np.linspace(-3, 3, 101)
    assert np.max(np.abs(fl(ys) - f(ys))) <= 8.0 * 1e-6 + 5.0 * 1e-6


def test_mollifier_vanishes_above_nonpositive_payoff():
    spec = GeneratorSpec(3.0, 10.0, 4.0, 0.01)
    fl = mollify_generator(spec, -0.5)
    ys = np.arange(-50, 501) * 0.01
    np.testing.assert_allclose(fl(ys), 0.0, atol=1e-12)


# -- Picard ----------------------------------------------------------------

def test_picard_zero_generator_one_sweep():
    tree = grow_tree(1.0, 2, lambda t, s: [s + 1, s - 1], dt=0.1)
    m = Measure({n: (0.3, 0.7) for n in tree.nonterminal})
    xi = {n.id: -50.0 for n in tree.nodes}
    xi.update({l: v for l, v in zip(tree.leaves, (4.0, -1.0, 9.0, 0.5))})
    # payoff far below every attainable value: the generator is zero up to the grid sawtooth
    spec = GeneratorSpec(1.0, 5.0, 1.0, 1e-13)
    res = picard_solve(tree, m, xi, spec)
    trunc = {l: truncate_terminal(xi[l], 5.0) for l in tree.leaves}
    expected = dict(trunc)
    for nid in tree.backward():
        expected[nid] = m[nid] @ [expected[c] for c in tree[nid].succ]
    first = picard_iterates(tree, m, xi, spec, 1)[1]
    for k in xi:
        assert first[k] == pytest.approx(expected[k], abs=1e-12)
    assert res.converged and res.iterations == 2


def test_picard_contraction_on_chain():
    tree = grow_tree(1.0, 3, lambda t, s: [s], dt=1 / 6)
    m = Measure({n: (1.0,) for n in tree.nonterminal})
    xi = {n.id: 2.0 - 0.5 * n.t for n in tree.nodes}
    spec = GeneratorSpec(n=2.0, m=10.0, ell=1.0, h=1e-4)
    res = picard_solve(tree, m, xi, spec)
    assert res.converged
    ratios = contraction_ratios(res.diffs)
    assert ratios and max(ratios) <= 0.5 + 1e-9


def test_picard_contraction_random():
    rng = np.random.default_rng(5)
    for tree, m, xi in desk_cases(5, 25, dt=0.1):
        T = 0.1 * tree.horizon
        ell = float(rng.uniform(0.1, 0.95)) / T
        spec = GeneratorSpec(n=float(rng.uniform(0.1, 2 * ell)), m=3.0, ell=ell, h=1e-3)
        res = picard_solve(tree, m, xi, spec)
        assert res.converged
        assert all(r <= ell * T + 1e-9 for r in contraction_ratios(res.diffs))


def test_picard_warns_without_contraction(caplog):
    tree, m, xi = fixture_node()
    with caplog.at_level(logging.WARNING, logger="robust_snell.rbsde_penalization"):
        picard_solve(tree, m, xi, GeneratorSpec(1.0, 2.0, 1.5, 0.01), k_max=5)
    assert any("contraction" in r.message for r in caplog.records)
    assert any("did not reach" in r.message for r in caplog.records)


def test_picard_iterates_alternate_on_fixture():
    tree, m, xi = fixture_node()
    spec = GeneratorSpec(n=0.5, m=5.0, ell=0.5, h=1e-3)
    roots = [Y["r"] for Y in picard_iterates(tree, m, xi, spec, 8)]
    steps = np.diff(roots)[1:]
    assert np.all(steps[:-1] * steps[1:] < 0)
    fixed = penalized_snell(tree, m, xi, 0.5).Y["r"]
    assert picard_solve(tree, m, xi, spec).Y["r"] == pytest.approx(fixed, abs=1e-9)


def test_even_and_odd_iterates_bracket_fixed_point():
    # nonnegative payoff and a large truncation keep the generator nonnegative
    for tree, m, xi in desk_cases(6, 15, dt=0.1, nonneg=True):
        T = 0.1 * tree.horizon
        # fine grid: off-grid the mollifier is a sawtooth of height ell * h
        spec = GeneratorSpec(n=0.5 / T, m=50.0, ell=0.6 / T, h=1e-10)
        its = picard_iterates(tree, m, xi, spec, 12)
        fixed = picard_solve(tree, m, xi, spec).Y
        for k in xi:
            even = [Y[k] for Y in its[0::2]]
            odd = [Y[k] for Y in its[1::2]]
            assert np.all(np.diff(even) >= -1e-10) and np.all(np.diff(odd) <= 1e-10)
            assert even[-1] <= fixed[k] + 1e-9 <= odd[-1] + 2e-9


def test_ladder_start_is_zero():
    tree, m, xi = fixture_node()
    assert ladder_value(tree, m, xi, 1.0, 2.0, 1.0, k=0) == 0.0


def test_four_index_cross_check():
    rng = np.random.default_rng(7)
    for _ in range(5):
        tree = random_tree(rng, 2, dt=0.01)
        m = random_family(rng, tree, max_extremes=1).first()
        xi = {n.id: float(rng.uniform(0, 2)) for n in tree.nodes}
        pen = penalized_snell(tree, m, xi, 10).Y[tree.root]
        val = ladder_value(tree, m, xi, n=10, m=50, ell=20, h=1e-7)
        assert val == pytest.approx(pen, abs=1e-6)


def test_ladder_monotone_in_n():
    rng = np.random.default_rng(8)
    tree = random_tree(rng, 2, dt=1e-4)
    m = random_family(rng, tree, max_extremes=1).first()
    xi = {n.id: float(rng.uniform(0, 2)) for n in tree.nodes}
    vals = []
    for n in (1, 10, 100, 1000):
        v = ladder_value(tree, m, xi, n=n, m=1e4, ell=n, h=1e-9)
        assert v == pytest.approx(penalized_snell(tree, m, xi, n).Y[tree.root], abs=1e-9)
        vals.append(v)
    assert np.all(np.diff(vals) >= -1e-12)


def test_ladder_composition_reaches_snell():
    # inner indices reproduce the closed form (cross-check above); the closed form is within 1e-3 at n = 1e4
    for tree, m, xi in desk_cases(9, 20):
        pen = penalized_snell(tree, m, xi, 1e4).Y[tree.root]
        assert abs(classical_snell(tree, m, xi)[tree.root] - pen) <= 1e-3
