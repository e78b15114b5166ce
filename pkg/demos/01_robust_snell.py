"""Aggregated Snell envelope on a small trinomial tree.

Builds an uncertain-volatility lattice, prices an American put under every
single extreme measure and under the whole family, and checks the family
value against exhaustive enumeration of exercise rules and measures.
"""
from robust_snell import (MeasureFamily, UVSpec, brute_force_value, classical_snell, optimal_exercise,
                          robust_snell, uv_lattice)


def main():
    spec = UVSpec(sigma_lo=0.15, sigma_hi=0.35, steps=3, dt=0.25, s0=1.0)
    tree, family = uv_lattice(spec)
    xi = {n.id: max(1.0 - n.S[0], 0.0) for n in tree.nodes}
    print(f"tree: {len(tree)} nodes, horizon {tree.horizon}, {family.size()} extreme measures")

    for j, label in enumerate(("low vol", "high vol")):
        single = MeasureFamily(tree, {n: (family.local_sets[n][j],) for n in tree.nonterminal})
        print(f"  classical value under {label:>8}: {classical_snell(tree, single.first(), xi)[tree.root]:.6f}")

    Y = robust_snell(tree, family, xi)
    bf = brute_force_value(tree, family, xi)
    print(f"  robust value                 : {Y[tree.root]:.6f}")
    print(f"  brute force over rules x measures: {bf:.6f}  (diff {abs(bf - Y[tree.root]):.1e})")

    rule = optimal_exercise(tree, Y, xi)
    for t in range(tree.horizon + 1):
        stops = [n for n in tree.slices[t] if rule.stop[n]]
        print(f"  t={t}: exercise at {len(stops)}/{len(tree.slices[t])} nodes")


if __name__ == "__main__":
    main()
