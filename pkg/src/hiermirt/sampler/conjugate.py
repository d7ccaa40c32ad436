"""Conjugate full-conditional draws: guessing, item regressions.

The item blocks are Bayesian linear regressions with unit observation
noise: posterior precision = prior precision + design*design', posterior
mean solves the usual normal equations. Reference implementations here
take one item; the chain uses the batched helpers.
"""

from __future__ import annotations

import numpy as np


def beta_posterior_params(z_sum: int, n_obs: int, alpha: float, beta: float) -> tuple[float, float]:
    """Beta posterior parameters for a guessing probability."""
    if not 0 <= z_sum <= n_obs:
        raise ValueError(f"guess count {z_sum} outside 0..{n_obs}")
    return z_sum + alpha, n_obs - z_sum + beta


def sample_c(z_sum, n_obs, alpha: float, beta: float, rng: np.random.Generator):
    """Draw guessing probabilities from Beta(z_sum + alpha, n_obs - z_sum + beta)."""
    z_sum = np.asarray(z_sum, dtype=float)
    n_obs = np.asarray(n_obs, dtype=float)
    if np.any(z_sum < 0) or np.any(z_sum > n_obs):
        raise ValueError("guess count outside 0..n_obs")
    return rng.beta(z_sum + alpha, n_obs - z_sum + beta)


def gaussian_regression_posterior(design, obs, prior_mean, prior_cov):
    """Posterior (mean, cov) for coef in obs = design' coef + N(0, I) noise.

    design is (d, n): one column per contributing observation. With n = 0
    the posterior equals the prior.
    """
    design = np.atleast_2d(np.asarray(design, dtype=float))
    obs = np.asarray(obs, dtype=float)
    prior_mean = np.asarray(prior_mean, dtype=float)
    prior_cov = np.asarray(prior_cov, dtype=float)
    prior_prec = np.linalg.inv(prior_cov)
    post_prec = prior_prec + design @ design.T
    try:
        np.linalg.cholesky(post_prec)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"posterior precision not positive definite: {exc}"
        ) from exc
    cov = np.linalg.inv(post_prec)
    mean = cov @ (prior_prec @ prior_mean + design @ obs)
    return mean, cov


def sample_ab(x_obs, theta_cols, prior_mean, prior_cov, rng: np.random.Generator):
    """Draw (a_free, b) for one dichotomous item.

    theta_cols is (d, n): level-1 trait values (free coordinates only) of
    the n contributing subjects, i.e. those with observed cells and Z=0.
    The design appends the constant -1 row so the regression mean is
    a.theta - b. Identifiability zeros live outside the free coordinates
    and are untouched.
    """
    theta_cols = np.atleast_2d(np.asarray(theta_cols, dtype=float))
    n = theta_cols.shape[1]
    design = np.vstack([theta_cols, -np.ones((1, n))])
    mean, cov = gaussian_regression_posterior(design, x_obs, prior_mean, prior_cov)
    return rng.multivariate_normal(mean, cov, method="cholesky")


def sample_ag(xg_obs, theta_cols, prior_mean, prior_cov, rng: np.random.Generator):
    """Draw the free discrimination coordinates for one graded item."""
    mean, cov = gaussian_regression_posterior(theta_cols, xg_obs, prior_mean, prior_cov)
    return rng.multivariate_normal(mean, cov, method="cholesky")


# ---------------------------------------------------------------------------
# Batched helpers used by the chain
# ---------------------------------------------------------------------------


def batched_masked_gram(design, mask):
    """Per-item Gram matrices sum_j mask[i,j] design[:,j] design[:,j]'.

    design is (d, J), mask is (n_items, J); returns (n_items, d, d) via one
    BLAS call.
    """
    d, J = design.shape
    pairs = (design[:, None, :] * design[None, :, :]).reshape(d * d, J)
    return (mask @ pairs.T).reshape(-1, d, d)


def batched_gaussian_draw(post_prec, rhs, rng: np.random.Generator):
    """Draw from N(post_prec^-1 rhs, post_prec^-1) for a stack of SPD matrices."""
    chol = np.linalg.cholesky(post_prec)
    mean = np.linalg.solve(post_prec, rhs[..., None])[..., 0]
    z = rng.standard_normal(rhs.shape)
    step = np.linalg.solve(np.transpose(chol, (0, 2, 1)), z[..., None])[..., 0]
    return mean + step
