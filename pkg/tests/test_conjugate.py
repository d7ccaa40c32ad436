"""Conjugate blocks against independent least-squares and moment oracles."""

import numpy as np
import pytest

from hiermirt.sampler.conjugate import (
    batched_gaussian_draw,
    batched_masked_gram,
    beta_posterior_params,
    gaussian_regression_posterior,
    sample_ab,
    sample_ag,
    sample_c,
)


def _regression_oracle(design, obs, prior_mean, prior_cov):
    """Posterior via the stacked least-squares system, QR path.

    Augment the design with the prior's Cholesky whitening rows so the
    posterior mean is the plain least-squares solution; covariance comes
    from the inverse normal matrix of the stacked system.
    """
    design = np.atleast_2d(design)
    d = design.shape[0]
    prior_prec = np.linalg.inv(prior_cov)
    root = np.linalg.cholesky(prior_prec)
    stacked = np.vstack([design.T, root.T])
    target = np.concatenate([obs, root.T @ prior_mean])
    mean, *_ = np.linalg.lstsq(stacked, target, rcond=None)
    cov = np.linalg.inv(stacked.T @ stacked)
    return mean, cov


class TestBetaUpdate:
    def test_direct_substitution(self):
        assert beta_posterior_params(3, 10, 1.0, 1.0) == (4.0, 8.0)
        assert beta_posterior_params(0, 7, 1.0, 1.0) == (1.0, 8.0)

    def test_count_validation(self):
        with pytest.raises(ValueError):
            beta_posterior_params(11, 10, 1.0, 1.0)

    def test_moment_oracle(self, rng):
        draws = sample_c(np.full(100_000, 3), np.full(100_000, 10), 1.0, 1.0, rng)
        # Beta(4, 8): mean 1/3, var 4*8/(144*13)
        se = np.sqrt(32.0 / (144.0 * 13.0) / 100_000)
        assert abs(draws.mean() - 1.0 / 3.0) < 3 * se


class TestGaussianRegression:
    def test_no_observations_returns_prior(self):
        mean, cov = gaussian_regression_posterior(
            np.zeros((2, 0)), np.zeros(0), [1.0, 0.0], 4.0 * np.eye(2)
        )
        np.testing.assert_allclose(mean, [1.0, 0.0], atol=1e-14)
        np.testing.assert_allclose(cov, 4.0 * np.eye(2), atol=1e-12)

    def test_zero_design_row_keeps_prior_marginal(self, rng):
        # discrimination sees no signal when all trait values are zero;
        # the difficulty row still learns from the observations
        n = 40
        design = np.vstack([np.zeros(n), -np.ones(n)])
        obs = rng.normal(size=n) - 1.0
        prior_mean = np.array([1.0, 0.0])
        prior_cov = 4.0 * np.eye(2)
        mean, cov = gaussian_regression_posterior(design, obs, prior_mean, prior_cov)
        assert mean[0] == pytest.approx(1.0, abs=1e-12)
        assert cov[0, 0] == pytest.approx(4.0, abs=1e-12)
        want_prec = 0.25 + n
        want_mean = (0.25 * 0.0 + (-obs).sum()) / want_prec
        assert mean[1] == pytest.approx(want_mean, abs=1e-12)
        assert cov[1, 1] == pytest.approx(1.0 / want_prec, abs=1e-12)

    def test_matches_least_squares_oracle(self, rng):
        for _ in range(25):
            d = int(rng.integers(1, 5))
            n = int(rng.integers(1, 30))
            design = rng.normal(size=(d, n))
            obs = rng.normal(size=n)
            prior_mean = rng.normal(size=d)
            m = rng.normal(size=(d, d))
            prior_cov = m @ m.T + np.eye(d)
            mean, cov = gaussian_regression_posterior(design, obs, prior_mean, prior_cov)
            want_mean, want_cov = _regression_oracle(design, obs, prior_mean, prior_cov)
            np.testing.assert_allclose(mean, want_mean, atol=1e-12)
            np.testing.assert_allclose(cov, want_cov, atol=1e-12)

    def test_sample_ab_appends_difficulty_row(self, rng):
        theta = rng.normal(size=(2, 500))
        truth = np.array([1.2, 0.7])
        b_true = -0.4
        x = truth @ theta - b_true + rng.normal(size=500)
        draws = np.array(
            [
                sample_ab(x, theta, np.array([1.0, 1.0, 0.0]), 4 * np.eye(3), rng)
                for _ in range(400)
            ]
        )
        assert np.allclose(draws.mean(axis=0), [1.2, 0.7, -0.4], atol=0.2)

    def test_sample_ag_free_coordinates_only(self, rng):
        theta = rng.normal(size=(1, 400))
        x = 0.9 * theta[0] + rng.normal(size=400)
        draws = np.array(
            [sample_ag(x, theta, np.array([1.0]), 4 * np.eye(1), rng) for _ in range(300)]
        )
        assert abs(draws.mean() - 0.9) < 0.15


class TestBatchedHelpers:
    def test_masked_gram_matches_loop(self, rng):
        design = rng.normal(size=(3, 50))
        mask = (rng.uniform(size=(6, 50)) < 0.7).astype(float)
        got = batched_masked_gram(design, mask)
        for i in range(6):
            want = (design * mask[i]) @ design.T
            np.testing.assert_allclose(got[i], want, atol=1e-12)

    def test_batched_draw_moments(self, rng):
        prec = np.stack([np.array([[2.0, 0.5], [0.5, 1.0]])] * 1)
        rhs = np.array([[1.0, -0.5]])
        draws = np.array(
            [batched_gaussian_draw(prec, rhs, rng)[0] for _ in range(30_000)]
        )
        want_mean = np.linalg.solve(prec[0], rhs[0])
        want_cov = np.linalg.inv(prec[0])
        np.testing.assert_allclose(draws.mean(axis=0), want_mean, atol=0.02)
        np.testing.assert_allclose(np.cov(draws.T), want_cov, atol=0.02)
