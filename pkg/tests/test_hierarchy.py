"""Hierarchical prior: validation rules, simulation law, conditional density."""

import numpy as np
import pytest

from hiermirt import (
    HierarchySpec,
    TraitLoadings,
    check_marginal_scale,
    conditional_trait_logdensity,
    sample_prior_traits,
    validate_hierarchy,
    validate_loading_pattern,
)
from hiermirt.hierarchy import error_scales, implied_marginal_variances, prior_logdensity
from hiermirt.model import LatentState

LOG_STD_NORMAL_AT_0 = -0.91893853320467274178  # frozen -log(sqrt(2*pi))


class TestValidation:
    def test_four_children_single_parent_ok(self):
        spec = HierarchySpec((4, 1), ((0, 0, 0, 0),))
        assert validate_hierarchy(spec) == []

    def test_two_children_flagged(self):
        spec = HierarchySpec((2, 1), ((0, 0),))
        bad = validate_hierarchy(spec)
        assert any("fewer than three children" in v for v in bad)

    def test_two_parents_flagged_in_pattern(self):
        pattern = np.array([[1, 1], [1, 0], [1, 0], [0, 1], [0, 1]])
        bad = validate_loading_pattern((5, 2), [pattern])
        assert any("two non-null loadings" in v for v in bad)

    def test_parent_out_of_range(self):
        spec = HierarchySpec((3, 1), ((0, 0, 5),))
        bad = validate_hierarchy(spec)
        assert any("outside" in v for v in bad)

    def test_single_level_is_valid(self):
        assert validate_hierarchy(HierarchySpec((4,))) == []


class TestSamplePriorTraits:
    def test_zero_loadings_standard_normal_everywhere(self, rng):
        spec = HierarchySpec((3, 1), ((0, 0, 0),))
        loadings = TraitLoadings((np.zeros(3),))
        state = sample_prior_traits(spec, loadings, 40_000, rng)
        for level in state.traits:
            assert np.abs(level.mean(axis=1)).max() < 0.03
            assert np.abs(level.var(axis=1, ddof=1) - 1).max() < 0.04

    def test_near_unit_loading_child_tracks_parent(self, rng):
        spec = HierarchySpec((3, 1), ((0, 0, 0),))
        loadings = TraitLoadings((np.full(3, 1 - 1e-9),))
        state = sample_prior_traits(spec, loadings, 2_000, rng)
        parent = state.traits[1][0]
        diff = np.abs(state.traits[0] - parent[None, :])
        assert np.percentile(diff, 95) < 1e-4
        assert diff.max() < 1e-3

    def test_child_parent_correlation_equals_loading(self, rng):
        spec = HierarchySpec((3, 1), ((0, 0, 0),))
        loadings = TraitLoadings((np.array([0.8, 0.8, 0.8]),))
        state = sample_prior_traits(spec, loadings, 100_000, rng)
        parent = state.traits[1][0]
        for q in range(3):
            corr = np.corrcoef(state.traits[0][q], parent)[0, 1]
            assert corr == pytest.approx(0.8, abs=0.01)

    def test_sibling_conditional_independence(self, rng):
        spec = HierarchySpec((3, 1), ((0, 0, 0),))
        lam = np.array([0.9, 0.7, 0.5])
        loadings = TraitLoadings((lam,))
        n = 100_000
        state = sample_prior_traits(spec, loadings, n, rng)
        parent = state.traits[1][0]
        resid = state.traits[0] - lam[:, None] * parent[None, :]
        mc_se = 1.0 / np.sqrt(n)
        for a in range(3):
            for b in range(a + 1, 3):
                corr = np.corrcoef(resid[a], resid[b])[0, 1]
                assert abs(corr) < 3 * mc_se

    def test_structural_errors_raise(self, rng):
        spec = HierarchySpec((3, 1), ((0, 0, 4),))
        with pytest.raises(ValueError, match="invalid hierarchy"):
            sample_prior_traits(spec, TraitLoadings((np.zeros(3),)), 10, rng)

    def test_chain_of_depth_three_is_simulable(self, rng):
        # single-child chains fail the fitting rule but must still simulate
        spec = HierarchySpec((1, 1, 1), ((0,), (0,)))
        assert validate_hierarchy(spec)  # not identifiable
        loadings = TraitLoadings((np.array([0.95]), np.array([0.95])))
        state = sample_prior_traits(spec, loadings, 50_000, rng)
        assert abs(state.traits[0].var(ddof=1) - 1) < 0.05


class TestConditionalDensity:
    def test_standard_normal_at_zero(self):
        assert conditional_trait_logdensity(0.0, 0.0, 0.0) == pytest.approx(
            LOG_STD_NORMAL_AT_0, abs=1e-14
        )

    def test_sign_symmetry(self, rng):
        for _ in range(100):
            x, p = rng.normal(size=2)
            lam = rng.uniform(-0.99, 0.99)
            assert conditional_trait_logdensity(x, p, lam) == pytest.approx(
                conditional_trait_logdensity(-x, -p, lam), rel=1e-12
            )

    def test_normalizes_by_quadrature(self):
        # trapezoid oracle over a wide child grid
        grid = np.linspace(-10, 10, 4001)
        for lam, parent in ((0.0, 0.3), (0.8, -1.2), (-0.6, 2.0)):
            dens = np.exp([conditional_trait_logdensity(x, parent, lam) for x in grid])
            total = np.trapezoid(dens, grid)
            assert total == pytest.approx(1.0, abs=1e-6)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            conditional_trait_logdensity(0.0, 0.0, 1.0)


class TestMarginalScale:
    def test_analytic_variances_are_unit(self):
        spec = HierarchySpec((9, 3, 1), ((0, 0, 0, 1, 1, 1, 2, 2, 2), (0, 0, 0)))
        loadings = TraitLoadings((np.full(9, 0.95), np.full(3, 0.8)))
        for level in implied_marginal_variances(spec, loadings):
            assert np.abs(level - 1.0).max() < 1e-15

    def test_monte_carlo_agrees_with_unit_scale(self, rng):
        spec = HierarchySpec((3, 1), ((0, 0, 0),))
        loadings = TraitLoadings((np.array([0.95, 0.8, 0.5]),))
        report = check_marginal_scale(spec, loadings, 100_000, rng)
        assert report.max_abs_mean() < 0.02
        assert report.max_abs_variance_error() < 0.03
        # and within 3 standard errors of the exact law
        for mu, se in zip(report.means, report.se_mean):
            assert np.all(np.abs(mu) <= 3 * se + 1e-12)

    def test_single_level_unit_scale(self, rng):
        report = check_marginal_scale(HierarchySpec((2,)), TraitLoadings(()), 50_000, rng)
        assert report.max_abs_mean() < 0.02
        assert report.max_abs_variance_error() < 0.03

    def test_deep_chain_keeps_scale(self, rng):
        spec = HierarchySpec((1, 1, 1), ((0,), (0,)))
        loadings = TraitLoadings((np.array([0.95]), np.array([0.95])))
        report = check_marginal_scale(spec, loadings, 100_000, rng)
        assert report.max_abs_mean() < 0.02
        assert report.max_abs_variance_error() < 0.03

    def test_requires_enough_draws(self, rng):
        with pytest.raises(ValueError):
            check_marginal_scale(HierarchySpec((1,)), TraitLoadings(()), 100, rng)


def test_error_scales_and_prior_logdensity(rng):
    loadings = TraitLoadings((np.array([0.6, 0.0]),))
    scales = error_scales(loadings)
    assert scales.values[0] == pytest.approx([np.sqrt(1 - 0.36), 1.0])
    spec = HierarchySpec((2, 1), ((0, 0),))
    state = LatentState((np.array([[0.5], [-0.2]]), np.array([[1.0]])))
    got = prior_logdensity(spec, loadings, state)
    want = (
        conditional_trait_logdensity(0.5, 1.0, 0.6)
        + conditional_trait_logdensity(-0.2, 1.0, 0.0)
        + conditional_trait_logdensity(1.0, 0.0, 0.0)
    )
    assert got == pytest.approx(want, rel=1e-12)
