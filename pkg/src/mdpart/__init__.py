"""Minimal-difference partitions: gap sequences, exact counting and sampling,
limit-shape numerics and Monte Carlo experiments."""

from .counting import (CountTable, GrandCanonicalWeights, count_exact_parts, count_mdp, count_mdp_by_k,
                       count_mdp_total, eta, gen_fn_fixed_k, grand_weights, k_gamma, k_star)
from .errors import DomainError, EmptyClassError, GapSpecError, NotMdpError, RegimeError
from .gapseq import (Constant, Explicit, GapSequence, GeometricDist, IidRandom, Periodic, Rwre,
                     TwoPointDist, UniformIntDist, estimate_regularity, format_gap_spec, parse_gap_spec)
from .harness import (ExperimentReport, run_ensemble_equivalence, run_limit_shape_experiment,
                      run_parts_experiment, run_rwre_pipeline, sup_deviation)
from .partition import (Partition, conjugate, ground_state, is_mdp, sylvester_forward,
                        sylvester_inverse)
from .rwre import (EnvironmentSpec, Regime, RwreGapParams, TableP, TwoPoint, UniformP, classify_regime,
                   drift, kappa, make_rwre_gaps, run_walk)
from .sampler import (SamplerConfig, UniformSampler, sample_canonical, sample_grand, sample_uniform_n,
                      sample_uniform_nk)
from .shape import (ShapeConstants, ShapeCurve, Scaling, curve_area, dilog, phi, sample_curve, solve_T_star,
                    solve_Tq, theta, theta_of_T, verify_conservation, verify_duality)

__version__ = "0.1.0"
