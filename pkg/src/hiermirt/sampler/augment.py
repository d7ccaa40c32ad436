"""Data-augmentation draws for dichotomous and graded responses.

Dichotomous cells get a guessing indicator Z and a probit utility X:
a correct response is explained either by guessing (Z=1, X pinned at 0)
or by a positive utility (Z=0, X > 0); an incorrect response forces Z=0
and a negative utility. Graded cells get a utility confined between the
thresholds bracketing the observed score.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

from .truncated import truncated_normal, truncated_normal_onesided

_SMALLEST = np.finfo(float).tiny


def guess_probability(m, c):
    """P(Z=1 | Y=1) = c / (c + (1-c) Phi(m)) at linear predictor m."""
    m = np.asarray(m, dtype=float)
    c = np.asarray(c, dtype=float)
    denom = c + (1.0 - c) * ndtr(m)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(c > 0, c / np.maximum(denom, _SMALLEST), 0.0)
    return w


def sample_zx(y, m, c, rng: np.random.Generator):
    """Draw the (Z, X) augmentation for observed dichotomous cells.

    y=0: Z=0 and X ~ N(m,1) truncated negative. y=1: Z ~ Bernoulli(w)
    with w = c/(c + (1-c)Phi(m)); X is 0 under Z=1 and a positive
    truncated normal under Z=0. Vectorized over broadcastable inputs.
    """
    y = np.asarray(y)
    m = np.asarray(m, dtype=float)
    c = np.asarray(c, dtype=float)
    shape = np.broadcast_shapes(y.shape, m.shape, np.shape(c))
    w = guess_probability(m, c)
    z = np.logical_and(y == 1, rng.uniform(size=shape) < w)
    x = truncated_normal_onesided(np.where(y == 1, 1.0, -1.0), m, rng)
    x = np.where(z, 0.0, x)
    return z.astype(np.int8), x


def sample_xg(score, linpred, thresholds, rng: np.random.Generator):
    """Draw the graded utility: N(linpred, 1) between the score's thresholds.

    score and linpred may be arrays (cells of one item); thresholds is the
    item's strictly increasing cut vector.
    """
    t = np.asarray(thresholds, dtype=float)
    if np.any(np.diff(t) <= 0):
        raise ValueError(f"thresholds must be strictly increasing, got {t}")
    tpad = np.concatenate(([-np.inf], t, [np.inf]))
    score = np.asarray(score, dtype=int)
    if score.min() < 0 or score.max() > t.size:
        raise ValueError("score outside the item's category range")
    return truncated_normal(tpad[score], tpad[score + 1], linpred, rng)
