"""Posterior sampler: augmentation, conjugate blocks, Metropolis moves, chains."""

from .augment import guess_probability, sample_xg, sample_zx
from .chain import ChainError, ChainTrace, SamplerConfig, TraceGroup, run_chain
from .conjugate import (
    beta_posterior_params,
    gaussian_regression_posterior,
    sample_ab,
    sample_ag,
    sample_c,
)
from .metropolis import (
    adapt_step_size,
    graded_item_loglik,
    inverse_reparam_thresholds,
    lambda_log_conditional,
    reparam_thresholds,
    sample_bg,
    sample_lambda,
    threshold_logpost,
)
from .theta import (
    TraitConditional,
    conditional_logpdf,
    level1_information,
    sample_trait_levels,
    trait_conditionals,
)
from .truncated import truncated_normal

__all__ = [
    "ChainError",
    "ChainTrace",
    "SamplerConfig",
    "TraceGroup",
    "TraitConditional",
    "adapt_step_size",
    "beta_posterior_params",
    "conditional_logpdf",
    "gaussian_regression_posterior",
    "graded_item_loglik",
    "guess_probability",
    "inverse_reparam_thresholds",
    "lambda_log_conditional",
    "level1_information",
    "reparam_thresholds",
    "run_chain",
    "sample_ab",
    "sample_ag",
    "sample_bg",
    "sample_c",
    "sample_lambda",
    "sample_trait_levels",
    "sample_xg",
    "sample_zx",
    "threshold_logpost",
    "trait_conditionals",
    "truncated_normal",
]
