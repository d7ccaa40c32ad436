"""Metropolis-Hastings updates: loadings and graded thresholds.

Loadings get a scalar Gaussian random walk on (-1, 1). Thresholds are
updated through the translation/differences reparametrization with the
graded utilities integrated out of the target, which keeps the two moves
from being pinned by the current utilities.
"""

from __future__ import annotations

import numpy as np
from scipy.special import log_ndtr

from ..model import log_interval_mass
from .truncated import truncated_normal

_LOG_2PI = float(np.log(2.0 * np.pi))


def lambda_log_conditional(lam: float, child, parent) -> float:
    """Log full-conditional of one loading given child and parent trait values.

    Gaussian terms plus the flat-prior support indicator: -inf outside
    (-1, 1). Equals the summed child-given-parent log densities exactly.
    """
    if not -1.0 < lam < 1.0:
        return -np.inf
    child = np.asarray(child, dtype=float)
    parent = np.asarray(parent, dtype=float)
    var = 1.0 - lam * lam
    resid = child - lam * parent
    n = child.size
    return float(-0.5 * (n * (_LOG_2PI + np.log(var)) + resid @ resid / var))


def sample_lambda(lam: float, child, parent, step: float, rng: np.random.Generator):
    """One Gaussian random-walk move for a loading; returns (value, accepted)."""
    if step <= 0:
        raise ValueError("step scale must be positive")
    prop = lam + step * rng.standard_normal()
    if not -1.0 < prop < 1.0:
        return lam, False
    delta = lambda_log_conditional(prop, child, parent) - lambda_log_conditional(
        lam, child, parent
    )
    if np.log(rng.uniform()) < delta:
        return prop, True
    return lam, False


def adapt_step_size(rate: float, scale: float, target: float, gain: float = 1.0) -> float:
    """Multiplicative step-scale update steering acceptance toward target."""
    return float(scale * np.exp(gain * (rate - target)))


def reparam_thresholds(thresholds) -> np.ndarray:
    """Map ordered thresholds to (first, consecutive differences).

    Each stored difference is the representative, within one ulp of the
    rounded difference, whose sequential summation reconstructs the
    original threshold exactly; a plainly rounded difference can land one
    bit off under cancellation, and the round trip is required to be
    bit-exact.
    """
    t = np.asarray(thresholds, dtype=float)
    if np.any(np.diff(t) <= 0):
        raise ValueError(f"thresholds must be strictly increasing, got {t}")
    out = t.copy()
    for m in range(1, t.size):
        d = t[m] - t[m - 1]
        recon = t[m - 1] + d
        steps = 0
        while recon != t[m] and steps < 4:
            d = np.nextafter(d, np.inf if recon < t[m] else -np.inf)
            recon = t[m - 1] + d
            steps += 1
        out[m] = d
    return out


def inverse_reparam_thresholds(star) -> np.ndarray:
    """Inverse of reparam_thresholds: sequential cumulative sum."""
    s = np.asarray(star, dtype=float)
    if np.any(s[1:] <= 0):
        raise ValueError(f"difference coordinates must be positive, got {s}")
    out = np.empty_like(s)
    acc = s[0]
    out[0] = acc
    for m in range(1, s.size):
        acc = acc + s[m]
        out[m] = acc
    return out


def graded_item_loglik(thresholds, scores, linpred) -> float:
    """Marginal log-likelihood of one graded item's observed cells."""
    t = np.asarray(thresholds, dtype=float)
    scores = np.asarray(scores, dtype=int)
    linpred = np.asarray(linpred, dtype=float)
    tpad = np.concatenate(([-np.inf], t, [np.inf]))
    return float(np.sum(log_interval_mass(tpad[scores] - linpred, tpad[scores + 1] - linpred)))


def threshold_logpost(thresholds, scores, linpred) -> float:
    """Collapsed target for one item: marginal likelihood plus N(0,1) prior terms."""
    t = np.asarray(thresholds, dtype=float)
    if np.any(np.diff(t) <= 0):
        return -np.inf
    prior = -0.5 * float(t.size * _LOG_2PI + t @ t)
    return graded_item_loglik(t, scores, linpred) + prior


def sample_bg(
    thresholds,
    scores,
    linpred,
    step_translate: float,
    step_diff: float,
    rng: np.random.Generator,
):
    """Two-move threshold update for one graded item.

    Move 1 translates the whole vector by a Gaussian step (the differences
    are preserved, so ordering cannot break). Move 2 perturbs the
    difference coordinates with a positive-truncated Gaussian walk; its
    acceptance ratio carries the forward/reverse truncation normalizers.
    Returns (thresholds, (translate_accepted, diff_accepted)).
    """
    t = np.asarray(thresholds, dtype=float).copy()
    lp = threshold_logpost(t, scores, linpred)

    shift = step_translate * rng.standard_normal()
    cand = t + shift
    lp_cand = threshold_logpost(cand, scores, linpred)
    acc1 = np.log(rng.uniform()) < lp_cand - lp
    if acc1:
        t, lp = cand, lp_cand

    acc2 = False
    if t.size >= 2:
        star = reparam_thresholds(t)
        diffs = star[1:]
        # N(diffs, step_diff^2) truncated positive, via the unit-sd sampler
        cand_diffs = step_diff * truncated_normal(0.0, np.inf, diffs / step_diff, rng)
        cand_star = star.copy()
        cand_star[1:] = cand_diffs
        cand_t = inverse_reparam_thresholds(cand_star)
        lp_cand = threshold_logpost(cand_t, scores, linpred)
        # reverse/forward proposal normalizers from the positivity truncation
        hastings = float(
            np.sum(log_ndtr(diffs / step_diff)) - np.sum(log_ndtr(cand_diffs / step_diff))
        )
        acc2 = np.log(rng.uniform()) < lp_cand - lp + hastings
        if acc2:
            t = cand_t
    return t, (bool(acc1), bool(acc2))
