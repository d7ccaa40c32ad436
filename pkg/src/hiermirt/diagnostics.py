"""Posterior summaries, recovery scoring and convergence statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PosteriorSummary:
    """Mean, n-1 standard deviation and central 95% interval of a trace."""

    mean: float
    sd: float
    ci_low: float
    ci_high: float

    @property
    def ci_range(self) -> float:
        return self.ci_high - self.ci_low


def summarize(draws) -> PosteriorSummary:
    """Summarize one trace column.

    Quantiles use linear interpolation of order statistics (numpy's
    default, the type-7 rule: the p-quantile sits at position p*(n-1)
    between the sorted values).
    """
    draws = np.asarray(draws, dtype=float)
    if draws.size < 2:
        raise ValueError("need at least two draws to summarize")
    lo, hi = np.quantile(draws, [0.025, 0.975])
    return PosteriorSummary(
        mean=float(draws.mean()),
        sd=float(draws.std(ddof=1)),
        ci_low=float(lo),
        ci_high=float(hi),
    )


def rmse(estimates, truth) -> float:
    """Root mean squared error between estimates and generating values."""
    estimates = np.asarray(estimates, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimates.shape != truth.shape:
        raise ValueError(f"length mismatch: {estimates.shape} vs {truth.shape}")
    return float(np.sqrt(np.mean((estimates - truth) ** 2)))


def averaged_general_trait(level1_means) -> np.ndarray:
    """Per-subject average of the level-1 posterior means.

    The non-hierarchical baseline for a general trait: input is (Q1, J),
    output (J,).
    """
    level1_means = np.atleast_2d(np.asarray(level1_means, dtype=float))
    if level1_means.shape[0] < 1:
        raise ValueError("need at least one trait")
    return level1_means.mean(axis=0)


def _autocorrelations(x: np.ndarray, max_lag: int) -> np.ndarray:
    n = x.size
    centered = x - x.mean()
    padded = np.concatenate([centered, np.zeros(n)])
    f = np.fft.rfft(padded)
    acov = np.fft.irfft(f * np.conj(f))[: max_lag + 1] / n
    return acov / acov[0]


def ess(draws) -> float:
    """Effective sample size via the initial monotone sequence estimator.

    Autocorrelations are summed in even/odd lag pairs; the sum stops at
    the first non-positive pair and is forced non-increasing. A constant
    trace is defined to have ESS = n.
    """
    x = np.asarray(draws, dtype=float)
    if x.size < 100:
        raise ValueError("need at least 100 draws for an ESS estimate")
    return _ess(x)


def _ess(x: np.ndarray) -> float:
    n = x.size
    if np.var(x) == 0.0:
        return float(n)
    rho = _autocorrelations(x, n - 1)
    n_pairs = (n - 1) // 2
    gammas = []
    running_min = np.inf
    for m in range(n_pairs):
        g = rho[2 * m] + rho[2 * m + 1]
        if g <= 0.0:
            break
        running_min = min(running_min, g)
        gammas.append(running_min)
    tau = max(2.0 * float(np.sum(gammas)) - 1.0, 1e-12)
    return float(n / tau)


def geweke_z(draws, first: float = 0.1, last: float = 0.5) -> float:
    """Equality-of-means z score between the head and tail of a trace.

    Compares the first 10% against the last 50% with ESS-corrected
    standard errors; |z| beyond ~2-3 flags a drifting chain.
    """
    x = np.asarray(draws, dtype=float)
    n = x.size
    if n < 100:
        raise ValueError("need at least 100 draws for a Geweke diagnostic")
    head = x[: max(int(first * n), 10)]
    tail = x[-max(int(last * n), 10):]
    if np.var(head) == 0.0 and np.var(tail) == 0.0:
        return 0.0
    var_head = np.var(head, ddof=1) / _ess(head) if np.var(head) > 0 else 0.0
    var_tail = np.var(tail, ddof=1) / _ess(tail) if np.var(tail) > 0 else 0.0
    denom = np.sqrt(var_head + var_tail)
    return float((head.mean() - tail.mean()) / denom)
