"""Robust pricing and superhedging of American claims on finite scenario trees."""
from .market_model import (LoadError, Measure, MeasureFamily, ModelError, Node, ScenarioTree,
                           condition, grow_tree, load_model, paste, path_probability, save_model)
from .snell_aggregator import (ExerciseRule, brute_force_value, check_supermartingale,
                               classical_snell, optimal_exercise, robust_snell)
from .hedging_dual import (ArbitrageError, HedgeReport, NodeHedge, duality_gap,
                           martingale_polytope_vertices, node_hedge, optional_decomposition_check,
                           saturate, superhedge, verify_superhedge)
from .rbsde_penalization import (GeneratorSpec, PenalizedSolution, ladder_value, mollify_generator,
                                 penalization_gap, penalized_snell, picard_solve, truncate_terminal)
from .characteristics import (CharacteristicTriplet, FactorizedDiffusion, dominating_diffusion,
                              dominating_diffusion_componentwise, equivalence_suite, example_3_7,
                              factorize, hedging_candidate)
from .linalg import pseudo_inverse
from .model_families import LevySpec, UVSpec, levy_tree, moment_report, uv_lattice

__version__ = "0.1.0"
