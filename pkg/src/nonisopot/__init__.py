"""Weighted nonisotropic potential theory on the unit sphere of C^n, at desk scale."""

__version__ = "0.1.0"

from .geometry import (
    QuadratureGrid,
    admissible_contains,
    ball,
    build_grid,
    gauge,
    sphere_ball_measure,
    tent_contains,
)
from .weights import (
    BallFamily,
    WeightField,
    ap_constant,
    ball_average,
    doubling_order,
    dual_weight,
    tail_bound_ratio,
    weighted_mass,
)
from .holomorphic import (
    HoloFunction,
    RadialGrid,
    admissible_max,
    area_fn,
    hs_norm,
    inverse_radial_integral,
    littlewood_paley,
    radial_power,
    tl_norm,
)
from .potentials import (
    PotentialParams,
    SphereMeasure,
    cauchy_apply,
    continuity_criterion,
    energy,
    lump_measure,
    spread_measure_plan,
    holo_potential_U,
    holo_potential_V,
    holo_potential_norm,
    nonlinear_potential,
    riesz_apply,
    wolff_extension_lhs,
    wolff_potential,
    wolff_ratio,
)
from .capacity import (
    CapacityProblem,
    CapacityResult,
    ball_capacity_profile,
    capacitary_measure,
    capacity,
    extremal_check,
)
from .carleson import (
    BallMeasure,
    ExperimentConfig,
    capacity_condition_ratio,
    counterexample_weight,
    embed_const_C,
    embed_const_K,
    equivalence_experiment,
    tent_ball_ratio,
)

__all__ = [
    "__version__",
    "QuadratureGrid",
    "admissible_contains",
    "ball",
    "build_grid",
    "gauge",
    "sphere_ball_measure",
    "tent_contains",
    "BallFamily",
    "WeightField",
    "ap_constant",
    "ball_average",
    "doubling_order",
    "dual_weight",
    "tail_bound_ratio",
    "weighted_mass",
    "HoloFunction",
    "RadialGrid",
    "admissible_max",
    "area_fn",
    "hs_norm",
    "inverse_radial_integral",
    "littlewood_paley",
    "radial_power",
    "tl_norm",
    "PotentialParams",
    "SphereMeasure",
    "cauchy_apply",
    "continuity_criterion",
    "energy",
    "lump_measure",
    "spread_measure_plan",
    "holo_potential_U",
    "holo_potential_V",
    "holo_potential_norm",
    "nonlinear_potential",
    "riesz_apply",
    "wolff_extension_lhs",
    "wolff_potential",
    "wolff_ratio",
    "CapacityProblem",
    "CapacityResult",
    "ball_capacity_profile",
    "capacitary_measure",
    "capacity",
    "extremal_check",
    "BallMeasure",
    "ExperimentConfig",
    "capacity_condition_ratio",
    "counterexample_weight",
    "embed_const_C",
    "embed_const_K",
    "equivalence_experiment",
    "tent_ball_ratio",
]
