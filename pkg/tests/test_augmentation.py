"""Truncated-normal draws and the (Z, X) / graded-utility augmentations,
checked against closed-form truncated moments."""

import math

import numpy as np
import pytest

from hiermirt.sampler.augment import guess_probability, sample_xg, sample_zx
from hiermirt.sampler.truncated import truncated_normal, truncated_normal_onesided

# Frozen from 40-digit Mills-ratio evaluations.
TN_BELOW_ZERO_MEAN = -0.79788456080286535588  # N(0,1) | x < 0
TN_POS_HALF_MEAN = 1.0091604338370334858  # N(0.5,1) | x > 0
TN_10_11_MEAN = 10.098068374933019132  # N(0,1) | 10 < x < 11


def _mc_check(draws, target, label=""):
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    assert abs(draws.mean() - target) < 4 * se, (
        f"{label}: mean {draws.mean():.5f} vs {target:.5f} (se {se:.2g})"
    )


class TestTruncatedNormal:
    def test_bounds_respected(self, rng):
        lo = rng.normal(size=3000)
        hi = lo + rng.uniform(0.01, 4.0, size=3000)
        d = truncated_normal(lo, hi, rng.normal(size=3000), rng)
        assert np.all(d > lo) and np.all(d < hi)

    def test_one_sided_moments(self, rng):
        d = truncated_normal(-np.inf, 0.0, np.zeros(500_000), rng)
        assert np.all(d < 0)
        _mc_check(d, TN_BELOW_ZERO_MEAN, "below-zero")
        d = truncated_normal(0.0, np.inf, np.full(500_000, 0.5), rng)
        assert np.all(d > 0)
        _mc_check(d, TN_POS_HALF_MEAN, "positive at 0.5")

    def test_far_tail_interval(self, rng):
        d = truncated_normal(10.0, 11.0, np.zeros(200_000), rng)
        assert np.all((d > 10.0) & (d < 11.0))
        _mc_check(d, TN_10_11_MEAN, "tail (10,11)")

    def test_extreme_tail_no_nan(self, rng):
        d = truncated_normal(-40.0, -39.0, np.zeros(1000), rng)
        assert np.all(np.isfinite(d))
        assert np.all((d > -40.0) & (d < -39.0))
        d = truncated_normal(38.0, np.inf, np.zeros(1000), rng)
        assert np.all(np.isfinite(d)) and np.all(d > 38.0)

    def test_unbounded_is_plain_normal(self, rng):
        d = truncated_normal(-np.inf, np.inf, np.zeros(200_000), rng)
        assert abs(d.mean()) < 0.01
        assert abs(d.std() - 1.0) < 0.01

    def test_onesided_agrees_with_generic(self, rng):
        n = 300_000
        a = truncated_normal_onesided(np.ones(n), -1.2, rng)
        b = truncated_normal(0.0, np.inf, np.full(n, -1.2), rng)
        assert np.all(a > 0) and np.all(b > 0)
        se = math.sqrt(a.var() / n + b.var() / n)
        assert abs(a.mean() - b.mean()) < 4 * se
        assert abs(a.std() - b.std()) < 0.01


class TestSampleZX:
    def test_guess_probability_value(self):
        # c=0.2, m=0: 0.2 / (0.2 + 0.8 * 0.5)
        assert guess_probability(0.0, 0.2) == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_zero_guessing_never_flags(self, rng):
        y = rng.integers(0, 2, size=5000)
        z, x = sample_zx(y, np.zeros(5000), 0.0, rng)
        assert not z.any()
        assert np.all((x > 0) == (y == 1))

    def test_supports(self, rng):
        y = rng.integers(0, 2, size=20_000)
        z, x = sample_zx(y, rng.normal(size=20_000), 0.3, rng)
        assert np.all(z[y == 0] == 0)
        assert np.all(x[y == 0] < 0)
        assert np.all(x[(y == 1) & (z == 0)] > 0)
        assert np.all(x[z == 1] == 0.0)

    def test_flag_rate_and_conditional_mean(self, rng):
        n = 1_000_000
        y = np.ones(n, dtype=int)
        z, x = sample_zx(y, np.zeros(n), 0.2, rng)
        p_flag = z.mean()
        se = math.sqrt((1 / 3) * (2 / 3) / n)
        assert abs(p_flag - 1 / 3) < 3 * se
        kept = x[z == 0]
        # N(0,1) | x > 0 has mean phi(0)/Phi(0) = sqrt(2/pi)
        _mc_check(kept, math.sqrt(2 / math.pi), "positive utility")

    def test_bayes_identity_flag_times_marginal(self):
        # algebra on the conditional definitions: w * P(Y=1) == c
        for m in np.linspace(-3, 3, 13):
            for c in (0.0, 0.05, 0.2, 0.45):
                p = c + (1 - c) * 0.5 * math.erfc(-m / math.sqrt(2))
                w = float(guess_probability(m, c))
                assert abs(w * p - c) < 1e-15


class TestSampleXG:
    def test_top_category_support(self, rng):
        t = np.array([-1.0, 0.2, 1.4])
        d = sample_xg(np.full(5000, 3), 0.0, t, rng)
        assert np.all(d > 1.4)

    def test_symmetric_interval_mean(self, rng):
        t = np.array([-1.0, 1.0])
        d = sample_xg(np.ones(1_000_000, dtype=int), 0.0, t, rng)
        assert np.all((d > -1) & (d < 1))
        se = 0.5395600937548969 / 1000.0  # frozen sd of N(0,1) on (-1,1)
        assert abs(d.mean()) < 3 * se

    def test_positive_interval_mills_mean(self, rng):
        t = np.array([0.0])
        d = sample_xg(np.ones(1_000_000, dtype=int), 0.5, t, rng)
        _mc_check(d, TN_POS_HALF_MEAN, "graded (0,inf) at 0.5")

    def test_score_validation(self, rng):
        with pytest.raises(ValueError):
            sample_xg(np.array([5]), 0.0, np.array([0.0]), rng)
        with pytest.raises(ValueError):
            sample_xg(np.array([0]), 0.0, np.array([1.0, -1.0]), rng)
