"""Kernel hypothesis testing for general experimental designs.

A linear model is fitted on kernel embeddings of the observations; linear
combinations of its effects are tested with the truncated kernel
Hotelling-Lawley trace statistic, calibrated against a chi-square
distribution, with an optional landmark-compressed variant and a set of
projection-based model diagnostics.
"""

from .design import (
    ContrastMatrix,
    DesignBundle,
    FactorInfo,
    HypothesisProjector,
    design_from_matrix,
    hypothesis_projector,
    level_pair_contrast,
    one_way_design,
    padded_contrast,
    pairwise_contrast,
    two_way_additive_design,
    w_matrix,
)
from .diagnostics import (
    DiagnosticsBundle,
    DiscriminantAxes,
    cook_distances,
    discriminant_coordinates,
    projection_tables,
)
from .kernel import GramMatrix, KernelSpec, cross_gram, gram, median_heuristic
from .model import (
    FittedModel,
    PairwiseResult,
    TestResult,
    bh_adjust,
    chi2_sf,
    fit,
    kt_matrix,
    pairwise_tests,
    tkhl_test,
)
from .nystrom import (
    AnchorSystem,
    LandmarkPlan,
    build_anchors,
    landmark_design,
    landmark_residual_gram,
    nystrom_gram,
    nystrom_test,
    sample_landmarks,
)
from .sim import (
    NystromSimConfig,
    SimConfig,
    SimEntry,
    SimReport,
    generate_dataset,
    run_level_experiment,
    run_power_experiment,
)
from . import errors

__version__ = "0.1.0"

__all__ = [
    "AnchorSystem",
    "ContrastMatrix",
    "DesignBundle",
    "DiagnosticsBundle",
    "DiscriminantAxes",
    "FactorInfo",
    "FittedModel",
    "GramMatrix",
    "HypothesisProjector",
    "KernelSpec",
    "LandmarkPlan",
    "NystromSimConfig",
    "PairwiseResult",
    "SimConfig",
    "SimEntry",
    "SimReport",
    "TestResult",
    "bh_adjust",
    "build_anchors",
    "chi2_sf",
    "cook_distances",
    "cross_gram",
    "design_from_matrix",
    "discriminant_coordinates",
    "errors",
    "fit",
    "generate_dataset",
    "gram",
    "hypothesis_projector",
    "kt_matrix",
    "landmark_design",
    "landmark_residual_gram",
    "level_pair_contrast",
    "median_heuristic",
    "nystrom_gram",
    "nystrom_test",
    "one_way_design",
    "padded_contrast",
    "pairwise_contrast",
    "pairwise_tests",
    "projection_tables",
    "run_level_experiment",
    "run_power_experiment",
    "sample_landmarks",
    "tkhl_test",
    "two_way_additive_design",
    "w_matrix",
]
