"""Hierarchical multidimensional item response theory.

Latent traits form a K-level tree with unit marginal scales; items are
3-parameter probit dichotomous or graded-response, possibly loading
several level-1 traits. The package simulates such data and fits the full
posterior with a blocked Gibbs sampler, with brute-force oracles and
diagnostics alongside.
"""

from .diagnostics import PosteriorSummary, averaged_general_trait, ess, geweke_z, rmse, summarize
from .estimator import HierarchicalIRT
from .hierarchy import (
    MarginalScaleReport,
    TraitErrorScale,
    check_marginal_scale,
    conditional_trait_logdensity,
    error_scales,
    hierarchy_from_pattern,
    sample_prior_traits,
    validate_hierarchy,
    validate_loading_pattern,
)
from .model import (
    DICHOTOMOUS,
    GRADED,
    DichotomousItem,
    GradedItem,
    HierarchySpec,
    InvalidParameterError,
    ItemBank,
    LatentState,
    ResponseMatrix,
    TraitLoadings,
    apply_echelon_restriction,
    grm_category_probs,
    loglik,
    loglik_dichotomous,
    loglik_graded,
    prob_correct,
)
from .oracle import (
    AugmentationCheck,
    GridPosterior,
    JointModelState,
    PriorSettings,
    augmentation_marginal_check,
    grid_posterior_theta,
    log_joint,
    logjoint_block_slice,
)
from .sampler import ChainError, ChainTrace, SamplerConfig, run_chain
from .simulate import (
    GradedItemDesign,
    SimulatedDataset,
    SimulationDesign,
    TruthBundle,
    preset_design,
    simulate_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentationCheck",
    "ChainError",
    "ChainTrace",
    "DICHOTOMOUS",
    "DichotomousItem",
    "GRADED",
    "GradedItem",
    "GradedItemDesign",
    "GridPosterior",
    "HierarchicalIRT",
    "HierarchySpec",
    "InvalidParameterError",
    "ItemBank",
    "JointModelState",
    "LatentState",
    "MarginalScaleReport",
    "PosteriorSummary",
    "PriorSettings",
    "ResponseMatrix",
    "SamplerConfig",
    "SimulatedDataset",
    "SimulationDesign",
    "TraitErrorScale",
    "TraitLoadings",
    "TruthBundle",
    "apply_echelon_restriction",
    "augmentation_marginal_check",
    "averaged_general_trait",
    "check_marginal_scale",
    "conditional_trait_logdensity",
    "error_scales",
    "ess",
    "geweke_z",
    "grid_posterior_theta",
    "grm_category_probs",
    "hierarchy_from_pattern",
    "log_joint",
    "logjoint_block_slice",
    "loglik",
    "loglik_dichotomous",
    "loglik_graded",
    "preset_design",
    "prob_correct",
    "rmse",
    "run_chain",
    "sample_prior_traits",
    "simulate_dataset",
    "summarize",
    "validate_hierarchy",
    "validate_loading_pattern",
]
