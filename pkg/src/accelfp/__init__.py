"""Accelerated value and policy iteration for fixed-point problems.

Degree-d extrapolated value iteration for affine maps and discounted MDPs,
spectral region tests that predict its rate, policy iteration with
warm-started accelerated inner solves, and problem generators.
"""
from .mdp import AcceleratedPolicyIteration, MdpInstance, Policy, bellman_apply, dapi_solve
from .numeric import SparseRowMatrix, dense_eigenvalues, poly_roots, spectral_radius
from .params import AccelConfig, alpha_star, d_accel_alphas, flying_saucer_params
from .problems import HjbSpec, RandomMdpSpec, gen_random_mdp, hjb_discretize, hjb_preset, hjb_to_fixed_point
from .regions import RegionClassifier, RegionSpec, classify, in_sigma_d
from .solvers import (
    AcceleratedValueIteration,
    AffineProblem,
    IterationTrace,
    MomentumIteration,
    ValueIteration,
    build_companion,
    certify_region_for_matrix,
    davi_solve,
    momentum_solve,
    vi_solve,
)

__version__ = "0.1.0"

__all__ = [
    "AccelConfig",
    "AcceleratedPolicyIteration",
    "AcceleratedValueIteration",
    "AffineProblem",
    "HjbSpec",
    "IterationTrace",
    "MdpInstance",
    "MomentumIteration",
    "Policy",
    "RandomMdpSpec",
    "RegionClassifier",
    "RegionSpec",
    "SparseRowMatrix",
    "ValueIteration",
    "alpha_star",
    "bellman_apply",
    "build_companion",
    "certify_region_for_matrix",
    "classify",
    "d_accel_alphas",
    "dapi_solve",
    "davi_solve",
    "dense_eigenvalues",
    "flying_saucer_params",
    "gen_random_mdp",
    "hjb_discretize",
    "hjb_preset",
    "hjb_to_fixed_point",
    "in_sigma_d",
    "momentum_solve",
    "poly_roots",
    "spectral_radius",
    "vi_solve",
]
