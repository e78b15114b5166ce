"""Two notions of dominating diffusion on the rank-one counterexample.

Both coordinates carry the same Brownian motion and jump together. Each
diagonal entry of the diffusion density is positive, yet the density itself
is singular, so only the older per-coordinate notion holds.
"""
import numpy as np

from robust_snell.characteristics import (characteristics_report, example_3_7_triplet, factorize,
                                          hedging_candidate)
from robust_snell.linalg import pseudo_inverse


def main():
    trip = example_3_7_triplet()
    fact = factorize(trip)
    print("density c per interval:\n", fact.c[0])
    print("trace increments:", fact.dA)
    rep = characteristics_report(trip)
    for i, row in enumerate(rep["per_interval"]):
        print(f"interval {i}: det {row['det']:.1e}  componentwise {row['dd_old']}  determinant {row['dd_new']}")
    print("pseudo-inverse of c:\n", pseudo_inverse(fact.c[0]))
    for v in ([0.5, 0.5], [1.0, -1.0]):
        print(f"hedge candidate for c_SY={v}: {hedging_candidate([fact.c[0]], [np.array(v)])[0]}")


if __name__ == "__main__":
    main()
