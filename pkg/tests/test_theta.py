"""Joint trait conditionals against a dense Gaussian-conditioning oracle."""

import numpy as np
import pytest

from hiermirt import HierarchySpec, TraitLoadings
from hiermirt.sampler.theta import (
    conditional_logpdf,
    level1_information,
    sample_trait_levels,
    trait_conditionals,
)


def _dense_posterior(spec, loadings, design, obs):
    """Condition the stacked (traits, utilities) Gaussian on the utilities.

    Builds the full covariance of (theta_1, ..., theta_K, u) directly from
    the generative equations and applies the textbook conditioning
    formulas. Supports any K but is written for small cases only.
    """
    counts = spec.trait_counts
    dim = sum(counts)
    # covariance of the stacked traits, level by level from the top
    cov = np.zeros((dim, dim))
    offsets = np.cumsum((0, *counts))[:-1]
    k_top = spec.n_levels - 1
    top = slice(offsets[k_top], offsets[k_top] + counts[k_top])
    cov[top, top] = np.eye(counts[k_top])
    for k in range(k_top - 1, -1, -1):
        lam = loadings.values[k]
        link = np.zeros((counts[k], counts[k + 1]))
        link[np.arange(counts[k]), list(spec.parent[k])] = lam
        dmat = np.diag(1.0 - lam**2)
        sl_child = slice(offsets[k], offsets[k] + counts[k])
        sl_par = slice(offsets[k + 1], offsets[k + 1] + counts[k + 1])
        cov[sl_child, sl_child] = link @ cov[sl_par, sl_par] @ link.T + dmat
        for other in range(k + 1, spec.n_levels):
            sl_o = slice(offsets[other], offsets[other] + counts[other])
            cross = link @ cov[sl_par, sl_o]
            cov[sl_child, sl_o] = cross
            cov[sl_o, sl_child] = cross.T
    design = np.atleast_2d(design)
    n = design.shape[0]
    full_design = np.zeros((n, dim))
    full_design[:, : counts[0]] = design
    cov_tu = cov @ full_design.T
    cov_u = full_design @ cov @ full_design.T + np.eye(n)
    mu = cov_tu @ np.linalg.solve(cov_u, np.asarray(obs, float))
    post = cov - cov_tu @ np.linalg.solve(cov_u, cov_tu.T)
    return mu, post, offsets


class TestTraitConditionals:
    def test_single_level_conjugate_closed_form(self):
        spec = HierarchySpec((1,))
        loadings = TraitLoadings(())
        n = 5
        x_adj = np.array([0.3, -0.8, 1.1, 0.0, 2.2])
        conds = trait_conditionals(spec, loadings, np.ones((n, 1)), x_adj)
        assert len(conds) == 1
        assert conds[0].coef is None
        assert conds[0].offset[0] == pytest.approx(x_adj.sum() / (n + 1), abs=1e-12)
        assert conds[0].cov[0, 0] == pytest.approx(1.0 / (n + 1), abs=1e-12)

    def test_no_observations_returns_prior(self, small_hierarchy, small_loadings):
        conds = trait_conditionals(
            small_hierarchy, small_loadings, np.zeros((0, 3)), np.zeros(0)
        )
        top = conds[-1]
        np.testing.assert_allclose(top.offset, [0.0], atol=1e-15)
        np.testing.assert_allclose(top.cov, [[1.0]], atol=1e-12)
        level1 = conds[0]
        lam = small_loadings.values[0]
        np.testing.assert_allclose(level1.coef[:, 0], lam, atol=1e-12)
        np.testing.assert_allclose(np.diag(level1.cov), 1 - lam**2, atol=1e-12)
        np.testing.assert_allclose(level1.offset, np.zeros(3), atol=1e-15)

    def test_matches_dense_oracle_two_levels(self, rng):
        spec = HierarchySpec((3, 1), ((0, 0, 0),))
        loadings = TraitLoadings((np.array([0.9, 0.6, -0.4]),))
        # two items per trait, fixed numeric design
        design = np.array(
            [
                [1.0, 0.0, 0.0],
                [0.8, 0.0, 0.0],
                [0.0, 1.2, 0.0],
                [0.0, 0.7, 0.3],
                [0.0, 0.0, 1.0],
                [0.4, 0.0, 0.9],
            ]
        )
        obs = np.array([0.5, -0.3, 1.4, 0.2, -1.0, 0.7])
        conds = trait_conditionals(spec, loadings, design, obs)
        mu, post, offsets = _dense_posterior(spec, loadings, design, obs)

        top = conds[-1]
        assert top.offset[0] == pytest.approx(mu[3], abs=1e-10)
        assert top.cov[0, 0] == pytest.approx(post[3, 3], abs=1e-10)

        s11 = post[:3, :3]
        s12 = post[:3, 3:4]
        s22 = post[3:4, 3:4]
        coef_oracle = s12 @ np.linalg.inv(s22)
        cov_oracle = s11 - coef_oracle @ s12.T
        offset_oracle = mu[:3] - coef_oracle[:, 0] * mu[3]
        np.testing.assert_allclose(conds[0].coef, coef_oracle, atol=1e-10)
        np.testing.assert_allclose(conds[0].cov, cov_oracle, atol=1e-10)
        np.testing.assert_allclose(conds[0].offset, offset_oracle, atol=1e-10)

    def test_matches_dense_oracle_three_levels(self, rng):
        spec = HierarchySpec((3, 3, 1), ((0, 1, 2), (0, 0, 0)))
        loadings = TraitLoadings((np.array([0.7, 0.5, 0.9]), np.array([0.8, 0.6, 0.4])))
        design = rng.normal(size=(4, 3)) * np.array([1.0, 1.0, 1.0])
        obs = rng.normal(size=4)
        conds = trait_conditionals(spec, loadings, design, obs)
        mu, post, offsets = _dense_posterior(spec, loadings, design, obs)
        top = conds[-1]
        assert top.offset[0] == pytest.approx(mu[6], abs=1e-10)
        assert top.cov[0, 0] == pytest.approx(post[6, 6], abs=1e-10)
        # level 2 given level 3
        s11 = post[3:6, 3:6]
        s12 = post[3:6, 6:7]
        s22 = post[6:7, 6:7]
        coef_oracle = s12 @ np.linalg.inv(s22)
        np.testing.assert_allclose(conds[1].coef, coef_oracle, atol=1e-10)
        np.testing.assert_allclose(
            conds[1].cov, s11 - coef_oracle @ s12.T, atol=1e-10
        )


class TestSampleTraitLevels:
    @staticmethod
    def _info(spec, design, obs, n_subjects):
        q1 = spec.trait_counts[0]
        prec = np.zeros((n_subjects, q1, q1))
        pot = np.zeros((n_subjects, q1))
        for j in range(n_subjects):
            p, h = level1_information(design[j], obs[j])
            prec[j], pot[j] = p, h
        return prec, pot

    def test_deterministic_under_seed(self, small_hierarchy, small_loadings, rng):
        design = [rng.normal(size=(4, 3)) for _ in range(3)]
        obs = [rng.normal(size=4) for _ in range(3)]
        prec, pot = self._info(small_hierarchy, design, obs, 3)
        a = sample_trait_levels(
            small_hierarchy, small_loadings, prec, pot, np.random.default_rng(9)
        )
        b = sample_trait_levels(
            small_hierarchy, small_loadings, prec, pot, np.random.default_rng(9)
        )
        for la, lb in zip(a, b):
            assert np.array_equal(la, lb)

    def test_identical_subjects_share_the_law(self, small_hierarchy, small_loadings, rng):
        design_row = rng.normal(size=(4, 3))
        obs_row = rng.normal(size=4)
        prec, pot = self._info(
            small_hierarchy, [design_row, design_row], [obs_row, obs_row], 2
        )
        draws = []
        for _ in range(4000):
            lv = sample_trait_levels(small_hierarchy, small_loadings, prec, pot, rng)
            stacked = np.vstack([lv[0], lv[1]])  # (4 traits, 2 subjects)
            draws.append(stacked)
        draws = np.array(draws)  # (n, 4, 2)
        sub0 = draws[:, :, 0]
        sub1 = draws[:, :, 1]
        se = np.sqrt(sub0.var(axis=0) / 4000 + sub1.var(axis=0) / 4000)
        assert np.all(np.abs(sub0.mean(axis=0) - sub1.mean(axis=0)) < 5 * se)
        # independence across subjects
        for col in range(sub0.shape[1]):
            corr = np.corrcoef(sub0[:, col], sub1[:, col])[0, 1]
            assert abs(corr) < 5 / np.sqrt(4000)

    def test_moments_match_conditionals(self, small_hierarchy, small_loadings, rng):
        design = rng.normal(size=(5, 3))
        obs = rng.normal(size=5)
        conds = trait_conditionals(small_hierarchy, small_loadings, design, obs)
        # implied joint mean: top offset propagated down
        mu2 = conds[-1].offset
        mu1 = conds[0].coef @ mu2 + conds[0].offset
        prec, pot = self._info(small_hierarchy, [design], [obs], 1)
        n = 20_000
        acc = np.zeros(4)
        rng2 = np.random.default_rng(77)
        sq = np.zeros(4)
        for _ in range(n):
            lv = sample_trait_levels(small_hierarchy, small_loadings, prec, pot, rng2)
            v = np.concatenate([lv[0][:, 0], lv[1][:, 0]])
            acc += v
            sq += v * v
        mean = acc / n
        sd = np.sqrt(sq / n - mean**2)
        want_mean = np.concatenate([mu1, mu2])
        assert np.all(np.abs(mean - want_mean) < 5 * sd / np.sqrt(n))

    def test_zero_information_recovers_prior_scale(self, small_hierarchy, small_loadings):
        n = 30_000
        prec = np.zeros((n, 3, 3))
        pot = np.zeros((n, 3))
        lv = sample_trait_levels(
            small_hierarchy, small_loadings, prec, pot, np.random.default_rng(3)
        )
        for level in lv:
            assert np.abs(level.mean(axis=1)).max() < 0.03
            assert np.abs(level.var(axis=1, ddof=1) - 1).max() < 0.04
        lam = small_loadings.values[0]
        for q in range(3):
            corr = np.corrcoef(lv[0][q], lv[1][0])[0, 1]
            assert corr == pytest.approx(lam[q], abs=0.03)


def test_conditional_logpdf_is_a_density(small_hierarchy, small_loadings, rng):
    # normalization over a coarse 2-D slice: vary one child trait and the top
    design = rng.normal(size=(4, 3))
    obs = rng.normal(size=4)
    conds = trait_conditionals(small_hierarchy, small_loadings, design, obs)
    base1 = conds[0].coef @ conds[-1].offset + conds[0].offset
    grid = np.linspace(-6, 6, 801)
    # integrate the level-1 trait 0 conditional at fixed parent
    parent = conds[-1].offset
    dens = []
    for v in grid:
        lev1 = base1.copy()
        lev1[0] = v
        dens.append(np.exp(conditional_logpdf(conds, [lev1, parent])))
    marginal = np.trapezoid(dens, grid)
    # a 1-D slice through a joint Gaussian integrates to peak * sqrt(2 pi) *
    # conditional sd, where the conditional variance is 1/precision[0,0]
    prec00 = np.linalg.inv(conds[0].cov)[0, 0]
    peak = np.exp(conditional_logpdf(conds, [base1, parent]))
    assert marginal == pytest.approx(peak * np.sqrt(2 * np.pi / prec00), rel=1e-6)
