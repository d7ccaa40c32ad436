"""Independent brute-force references for the test and acceptance suites.

Everything here is deliberately simple and slow: tensor-product grids,
term-by-term joint-density evaluation, forward Monte Carlo. The only code
shared with the sampler is the core model module, so a sampler bug cannot
hide inside its own oracle.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, ndtr

from .hierarchy import prior_logdensity
from .model import (
    DICHOTOMOUS,
    HierarchySpec,
    InvalidParameterError,
    ItemBank,
    LatentState,
    ResponseMatrix,
    TraitLoadings,
    dichotomous_cell_loglik,
    log_interval_mass,
)
from .sampler.augment import sample_zx

_LOG_2PI = float(np.log(2.0 * np.pi))


# ---------------------------------------------------------------------------
# Grid posteriors
# ---------------------------------------------------------------------------


def _trapezoid_weights(axis: np.ndarray) -> np.ndarray:
    w = np.empty_like(axis)
    w[0] = (axis[1] - axis[0]) / 2.0
    w[-1] = (axis[-1] - axis[-2]) / 2.0
    w[1:-1] = (axis[2:] - axis[:-2]) / 2.0
    return w


def grid_axis(center: float, sd: float, n: int = 401, half_width: float = 6.0) -> np.ndarray:
    """Default evaluation axis: n points spanning center +/- half_width * sd."""
    return np.linspace(center - half_width * sd, center + half_width * sd, n)


@dataclass(frozen=True)
class GridPosterior:
    """Normalized density on a tensor-product grid (up to 3 dimensions)."""

    axes: tuple[np.ndarray, ...]
    log_density: np.ndarray  # unnormalized, grid-shaped
    density: np.ndarray  # normalized against the trapezoid weights
    log_norm: float
    weights: np.ndarray

    def normalization(self) -> float:
        return float(np.sum(self.density * self.weights))

    def mean(self) -> np.ndarray:
        out = np.empty(len(self.axes))
        for d, axis in enumerate(self.axes):
            shape = [1] * len(self.axes)
            shape[d] = axis.size
            out[d] = np.sum(self.density * self.weights * axis.reshape(shape))
        return out

    def sd(self) -> np.ndarray:
        mu = self.mean()
        out = np.empty(len(self.axes))
        for d, axis in enumerate(self.axes):
            shape = [1] * len(self.axes)
            shape[d] = axis.size
            second = np.sum(self.density * self.weights * (axis.reshape(shape) - mu[d]) ** 2)
            out[d] = np.sqrt(second)
        return out


def _normalize_grid(axes, log_density) -> GridPosterior:
    weights = _trapezoid_weights(axes[0])
    for axis in axes[1:]:
        weights = np.multiply.outer(weights, _trapezoid_weights(axis))
    peak = float(np.max(log_density))
    z = float(np.sum(np.exp(log_density - peak) * weights))
    log_norm = peak + np.log(z)
    return GridPosterior(
        axes=tuple(axes),
        log_density=log_density,
        density=np.exp(log_density - log_norm),
        log_norm=log_norm,
        weights=weights,
    )


def grid_posterior_theta(
    spec: HierarchySpec,
    loadings: TraitLoadings,
    bank: ItemBank,
    responses_one_subject,
    axes,
) -> GridPosterior:
    """Posterior over one subject's full trait vector on a tensor grid.

    responses_one_subject is a length-n_items vector with NaN for missing
    cells. Axes are ordered level-1 traits first, then level 2, and so on;
    the total dimensionality must be at most 3. The likelihood uses the
    marginal response probabilities (utilities integrated out), so this is
    a fully augmentation-free reference.
    """
    dims = spec.n_traits_total
    if dims > 3:
        raise ValueError(f"grid posterior supports at most 3 trait dimensions, got {dims}")
    axes = [np.asarray(a, dtype=float) for a in axes]
    if len(axes) != dims:
        raise ValueError(f"need {dims} axes, got {len(axes)}")
    resp = np.asarray(responses_one_subject, dtype=float)
    if resp.shape != (bank.n_items,):
        raise ValueError("responses must be one value per item")

    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)  # (N, dims)
    n_pts = pts.shape[0]

    split = np.cumsum(spec.trait_counts)[:-1]
    levels = np.split(pts, split, axis=1)  # per level: (N, Q_k)

    logp = np.zeros(n_pts)
    top = levels[-1]
    logp += -0.5 * (np.sum(top**2, axis=1) + spec.trait_counts[-1] * _LOG_2PI)
    for k in range(spec.n_levels - 1):
        lam = loadings.values[k]
        var = 1.0 - lam**2
        parent = levels[k + 1][:, list(spec.parent[k])]
        resid = levels[k] - lam[None, :] * parent
        logp += -0.5 * np.sum(
            resid**2 / var[None, :] + np.log(var)[None, :] + _LOG_2PI, axis=1
        )

    theta1 = levels[0]
    for i, item in enumerate(bank.items):
        if np.isnan(resp[i]):
            continue
        if item.kind == DICHOTOMOUS:
            m = theta1 @ item.a - item.b
            logp += dichotomous_cell_loglik(m, item.c, int(resp[i]))
        else:
            s = theta1 @ item.a
            t = np.concatenate(([-np.inf], item.thresholds, [np.inf]))
            y = int(resp[i])
            logp += log_interval_mass(t[y] - s, t[y + 1] - s)

    return _normalize_grid(axes, logp.reshape([a.size for a in axes]))


# ---------------------------------------------------------------------------
# Full augmented joint density, term by term
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PriorSettings:
    """Hyperparameters of the item-parameter and guessing priors."""

    ab_mean_a: float = 1.0
    ab_mean_b: float = 0.0
    ab_var: float = 4.0
    ag_mean: float = 1.0
    ag_var: float = 4.0
    c_alpha: float = 1.0
    c_beta: float = 4.0


@dataclass
class JointModelState:
    """A complete augmented-model configuration for brute-force evaluation."""

    hierarchy: HierarchySpec
    loadings: TraitLoadings
    bank: ItemBank
    responses: ResponseMatrix
    z: np.ndarray  # (n_items, J); only dichotomous rows are read
    x: np.ndarray
    xg: np.ndarray
    theta: list[np.ndarray]
    priors: PriorSettings

    def clone(self) -> "JointModelState":
        return copy.deepcopy(self)


def _norm_logpdf(v, mean, var) -> float:
    v = np.asarray(v, dtype=float)
    return float(np.sum(-0.5 * (np.log(var) + _LOG_2PI + (v - mean) ** 2 / var)))


def log_joint(state: JointModelState) -> float:
    """Log of the joint density of responses, augmentations and parameters.

    Indicator factors (response/utility consistency, loading support,
    threshold ordering) return -inf when violated.
    """
    bank = state.bank
    obs = state.responses.observed
    vals = state.responses.values
    theta1 = state.theta[0]
    total = 0.0

    for i, item in enumerate(bank.items):
        cells = np.flatnonzero(obs[i])
        if item.kind == DICHOTOMOUS:
            m = item.a @ theta1[:, cells] - item.b
            for pos, j in enumerate(cells):
                y = int(vals[i, j])
                z = int(state.z[i, j])
                x = float(state.x[i, j])
                if y == 1:
                    ok = (z == 1 and x == 0.0) or (z == 0 and x >= 0.0)
                else:
                    ok = z == 0 and x < 0.0
                if not ok:
                    return -np.inf
                if z == 1:
                    if item.c <= 0.0:
                        return -np.inf
                    total += np.log(item.c)
                else:
                    total += np.log1p(-item.c)
                    total += -0.5 * (_LOG_2PI + (x - m[pos]) ** 2)
            prior_mean = np.array(
                [state.priors.ab_mean_a] * len(item.loadings) + [state.priors.ab_mean_b]
            )
            free = np.append(item.a[list(item.loadings)], item.b)
            total += _norm_logpdf(free, prior_mean, state.priors.ab_var)
            if not 0.0 <= item.c < 1.0:
                return -np.inf
            a0, b0 = state.priors.c_alpha, state.priors.c_beta
            shape_term = 0.0 if a0 == 1.0 else (a0 - 1.0) * np.log(item.c)
            total += shape_term + (b0 - 1.0) * np.log1p(-item.c) - betaln(a0, b0)
        else:
            t = item.thresholds
            if np.any(np.diff(t) <= 0):
                return -np.inf
            tpad = np.concatenate(([-np.inf], t, [np.inf]))
            s = item.a @ theta1[:, cells]
            for pos, j in enumerate(cells):
                y = int(vals[i, j])
                xg = float(state.xg[i, j])
                if not tpad[y] < xg < tpad[y + 1]:
                    return -np.inf
                total += -0.5 * (_LOG_2PI + (xg - s[pos]) ** 2)
            total += _norm_logpdf(
                item.a[list(item.loadings)], state.priors.ag_mean, state.priors.ag_var
            )
            total += _norm_logpdf(t, 0.0, 1.0)

    for lam_level in state.loadings.values:
        if np.any(np.abs(lam_level) >= 1.0):
            return -np.inf
    total += prior_logdensity(
        state.hierarchy, state.loadings, LatentState(tuple(state.theta))
    )
    return float(total)


def _set_block(state: JointModelState, block: tuple, value: float) -> None:
    kind, *addr = block
    if kind == "c":
        (i,) = addr
        item = state.bank.items[i]
        object.__setattr__(item, "c", float(value))
    elif kind == "a":
        i, t = addr
        item = state.bank.items[i]
        item.a.setflags(write=True)
        item.a[t] = value
    elif kind == "b":
        (i,) = addr
        object.__setattr__(state.bank.items[i], "b", float(value))
    elif kind == "ag":
        i, t = addr
        item = state.bank.items[i]
        item.a.setflags(write=True)
        item.a[t] = value
    elif kind == "bg":
        i, m = addr
        item = state.bank.items[i]
        item.thresholds.setflags(write=True)
        item.thresholds[m] = value
    elif kind == "lambda":
        k, q = addr
        vals = list(state.loadings.values)
        vals[k] = vals[k].copy()
        vals[k][q] = value
        state.loadings = TraitLoadings(tuple(vals))
    elif kind == "theta":
        k, q, j = addr
        state.theta[k][q, j] = value
    else:
        raise ValueError(f"unknown block kind {kind!r}")


def logjoint_block_slice(state: JointModelState, block: tuple, grid) -> np.ndarray:
    """Evaluate the full joint log density along one parameter coordinate.

    block addresses a scalar: ("c", item), ("a", item, trait),
    ("b", item), ("ag", item, trait), ("bg", item, cut),
    ("lambda", level, trait) or ("theta", level, trait, subject).
    Everything else in the state is held fixed.
    """
    grid = np.asarray(grid, dtype=float)
    out = np.empty(grid.size)
    for g, v in enumerate(grid):
        work = state.clone()
        try:
            _set_block(work, block, float(v))
        except InvalidParameterError:
            out[g] = -np.inf  # off the parameter's support
            continue
        out[g] = log_joint(work)
    return out


# ---------------------------------------------------------------------------
# Augmentation equivalence
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AugmentationCheck:
    analytic_p: float
    empirical_p: float
    mc_se: float
    n_draws: int
    roundtrip_consistent: bool

    @property
    def within(self) -> float:
        """Absolute deviation in Monte-Carlo standard errors."""
        return abs(self.empirical_p - self.analytic_p) / self.mc_se


def augmentation_marginal_check(
    m: float, c: float, n_draws: int, rng: np.random.Generator
) -> AugmentationCheck:
    """Forward-simulate the augmentation and compare P(Y=1) to c + (1-c)Phi(m).

    Draws (Z, X) from the augmented law, reconstructs Y from the sign
    rules, and estimates P(Y=1). Every reconstructed response is also
    pushed back through sample_zx and re-reconstructed, asserting the
    conditional sampler lands in the matching support.
    """
    if n_draws < 100_000:
        raise ValueError("need at least 1e5 draws")
    analytic = c + (1.0 - c) * float(ndtr(m))
    z = rng.uniform(size=n_draws) < c
    x = np.where(z, 0.0, m + rng.standard_normal(n_draws))
    y = np.where(z, 1, (x >= 0.0).astype(int))
    empirical = float(np.mean(y))
    mc_se = float(np.sqrt(analytic * (1.0 - analytic) / n_draws)) or 1.0 / n_draws

    z2, x2 = sample_zx(y, np.full(n_draws, float(m)), c, rng)
    y2 = np.where(z2 == 1, 1, (x2 >= 0.0).astype(int))
    consistent = bool(np.array_equal(y, y2))
    return AugmentationCheck(analytic, empirical, mc_se, n_draws, consistent)
