"""Planar soap films with liquid: relaxed capillarity solver and verification harness."""

from .film import (
    Classification,
    Disk,
    FilmComplex,
    FilmEdge,
    LiquidRegion,
    SolveReport,
    Vertex,
    WireFrame,
    classify,
    film_from_dict,
    film_to_dict,
    liquid_volume,
    relaxed_energy,
    validate,
)
from .perturb import (
    DecollapseParams,
    PerturbationTrace,
    bump_competitor,
    decollapse,
    expansion_fit,
    upper_bound_probe,
)
from .scenarios import ScenarioError, ScenarioFile, load_scenario, parse_scenario
from .solver import Scenario, SolveConfig, SolverError, collapse_merge, lambda_estimate, minimize
from .spanning import SpanningCertificate, SpanningSpec, is_spanning, steiner_baseline
from .verify import (
    VerificationReport,
    convex_hull_check,
    density_check,
    first_variation_residual,
    hull_field_residual,
)

__version__ = "0.1.0"
