"""Generated families: volatility intervals and Levy-type triplets.

Widening the volatility interval raises the robust price of a put; a family
of two triplets dominates each of its members.
"""
from robust_snell import MeasureFamily, classical_snell, robust_snell
from robust_snell.model_families import LevySpec, LevyTriplet, UVSpec, levy_tree, moment_report, uv_lattice


def put(tree, k):
    return {n.id: max(k - n.S[0], 0.0) for n in tree.nodes}


def main():
    spacing = 0.4 * 0.5
    print("uncertain volatility, American put, K = s0")
    for lo, hi in [(0.2, 0.2), (0.1, 0.2), (0.1, 0.3), (0.1, 0.4)]:
        tree, fam = uv_lattice(UVSpec(lo, hi, 4, 0.25, 1.0, spacing=spacing))
        print(f"  [{lo:.2f}, {hi:.2f}]  {robust_snell(tree, fam, put(tree, 1.0))[tree.root]:.6f}")

    spec = UVSpec(0.1, 0.3, 2, 0.25, 1.0)
    tree, fam = uv_lattice(spec)
    for row in moment_report(tree, fam, spec)[:2]:
        print(f"  root extreme {row['extreme']}: rel var {row['rel_var']:.6f} target {row['target_var']:.6f}")

    spec = LevySpec([LevyTriplet(0.0, 0.5), LevyTriplet(0.0, 0.1, ((-0.2, 0.5),))], dt=0.05, steps=4, s0=1.0)
    tree, fam = levy_tree(spec)
    xi = put(tree, 1.0)
    print("\nLevy family, American put")
    for j in range(len(spec.triplets)):
        single = MeasureFamily(tree, {n: (fam.local_sets[n][j],) for n in tree.nonterminal})
        print(f"  triplet {j}: {classical_snell(tree, single.first(), xi)[tree.root]:.6f}")
    print(f"  family   : {robust_snell(tree, fam, xi)[tree.root]:.6f}")


if __name__ == "__main__":
    main()
