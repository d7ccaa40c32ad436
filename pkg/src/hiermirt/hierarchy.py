"""Hierarchical prior over latent traits: validation, simulation, conditionals.

The prior is a top-down Gaussian chain: top-level traits are i.i.d. N(0,1)
and each child trait equals loading * parent + error, with error variance
1 - loading**2 so every marginal stays N(0,1). All functions are pure;
callers own the random generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import HierarchySpec, LatentState, TraitLoadings

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class TraitErrorScale:
    """Conditional error s.d. per child trait: values[k][q] = sqrt(1 - loading^2)."""

    values: tuple[np.ndarray, ...]


def error_scales(loadings: TraitLoadings) -> TraitErrorScale:
    return TraitErrorScale(tuple(np.sqrt(1.0 - v**2) for v in loadings.values))


def structural_violations(spec: HierarchySpec) -> list[str]:
    """Violations that make the tree ill-formed (not merely unidentified)."""
    out = []
    if spec.n_levels < 1:
        out.append("hierarchy has no levels")
        return out
    if spec.trait_counts[-1] < 1:
        out.append("top level has no traits")
    for k, q in enumerate(spec.trait_counts):
        if q < 1:
            out.append(f"level {k + 1} has no traits")
    for k, row in enumerate(spec.parent):
        hi = spec.trait_counts[k + 1]
        for q, p in enumerate(row):
            if not 0 <= p < hi:
                out.append(
                    f"level {k + 1} trait {q + 1}: parent index {p + 1} outside 1..{hi}"
                )
    return out


def validate_hierarchy(spec: HierarchySpec) -> list[str]:
    """Return all rule violations; an empty list means the spec is valid.

    Beyond structural integrity this enforces the loading-pattern rules:
    one parent per child (guaranteed by the parent-map encoding; use
    :func:`validate_loading_pattern` for raw patterns) and at least three
    children per parent trait.
    """
    out = structural_violations(spec)
    if out:
        return out
    for k, row in enumerate(spec.parent):
        counts = np.bincount(np.asarray(row), minlength=spec.trait_counts[k + 1])
        for p, n in enumerate(counts):
            if n < 3:
                out.append(
                    f"level {k + 2} trait {p + 1} has fewer than three children ({n})"
                )
    return out


def validate_loading_pattern(trait_counts, patterns) -> list[str]:
    """Validate raw 0/1 loading patterns (one matrix per linked level pair).

    patterns[k] has shape (Q_{k+1 level}, Q_{k+2 level}); row q marks the
    parents of child trait q. Catches rows with zero or multiple non-null
    loadings, which the parent-map encoding cannot represent.
    """
    out = []
    counts = tuple(int(q) for q in trait_counts)
    if len(patterns) != len(counts) - 1:
        return [f"expected {len(counts) - 1} pattern matrices, got {len(patterns)}"]
    for k, pat in enumerate(patterns):
        pat = np.asarray(pat)
        if pat.shape != (counts[k], counts[k + 1]):
            out.append(f"pattern {k + 1} has shape {pat.shape}, expected "
                       f"{(counts[k], counts[k + 1])}")
            continue
        nz = (pat != 0).sum(axis=1)
        for q in np.flatnonzero(nz > 1):
            out.append(f"level {k + 1} trait {q + 1}: row has two non-null loadings")
        for q in np.flatnonzero(nz == 0):
            out.append(f"level {k + 1} trait {q + 1}: row has no non-null loading")
        children = (pat != 0).sum(axis=0)
        for p in np.flatnonzero(children < 3):
            out.append(
                f"level {k + 2} trait {p + 1} has fewer than three children "
                f"({int(children[p])})"
            )
    return out


def hierarchy_from_pattern(trait_counts, patterns) -> HierarchySpec:
    """Build a HierarchySpec from 0/1 loading patterns, or raise on violations."""
    bad = validate_loading_pattern(trait_counts, patterns)
    structural = [v for v in bad if "non-null" in v or "shape" in v or "expected" in v]
    if structural:
        raise ValueError("; ".join(structural))
    parent = tuple(
        tuple(int(np.flatnonzero(np.asarray(pat)[q])[0]) for q in range(len(pat)))
        for pat in patterns
    )
    return HierarchySpec(tuple(int(q) for q in trait_counts), parent)


def _check_simulation_inputs(spec: HierarchySpec, loadings: TraitLoadings) -> None:
    bad = structural_violations(spec)
    if bad:
        raise ValueError("invalid hierarchy: " + "; ".join(bad))
    if not loadings.matches(spec):
        raise ValueError("loadings do not match the hierarchy shape")


def sample_prior_traits(
    spec: HierarchySpec,
    loadings: TraitLoadings,
    n_subjects: int,
    rng: np.random.Generator,
) -> LatentState:
    """Draw latent traits for n_subjects independent subjects from the prior.

    Top level first (i.i.d. standard normal), then each lower level as
    loading * parent + error-scale * standard normal. Only structural
    validity is required, so degenerate trees (e.g. single-child chains)
    can be simulated even though they would fail the fitting rules.
    """
    _check_simulation_inputs(spec, loadings)
    k_top = spec.n_levels - 1
    traits: list[np.ndarray] = [np.empty(0)] * spec.n_levels
    traits[k_top] = rng.standard_normal((spec.trait_counts[k_top], n_subjects))
    for k in range(k_top - 1, -1, -1):
        lam = loadings.values[k][:, None]
        tau = np.sqrt(1.0 - lam**2)
        parent_rows = traits[k + 1][list(spec.parent[k]), :]
        noise = rng.standard_normal((spec.trait_counts[k], n_subjects))
        traits[k] = lam * parent_rows + tau * noise
    return LatentState(tuple(traits))


def conditional_trait_logdensity(theta_child: float, theta_parent: float, lam: float) -> float:
    """Log density of a child trait given its parent: N(lam*parent, 1 - lam^2)."""
    if not abs(lam) < 1.0:
        raise ValueError(f"|loading| must be < 1, got {lam}")
    var = 1.0 - lam * lam
    resid = theta_child - lam * theta_parent
    return -0.5 * (_LOG_2PI + np.log(var) + resid * resid / var)


def prior_logdensity(spec: HierarchySpec, loadings: TraitLoadings, state: LatentState) -> float:
    """Joint log prior density of a LatentState under the hierarchy."""
    if not state.consistent_with(spec):
        raise ValueError("latent state does not match the hierarchy shape")
    top = state.traits[-1]
    total = -0.5 * float(np.sum(top * top) + top.size * _LOG_2PI)
    for k in range(spec.n_levels - 1):
        lam = loadings.values[k][:, None]
        var = 1.0 - lam**2
        parent_rows = state.traits[k + 1][list(spec.parent[k]), :]
        resid = state.traits[k] - lam * parent_rows
        total += -0.5 * float(
            np.sum(np.log(var)) * state.n_subjects
            + np.sum(resid * resid / var)
            + resid.size * _LOG_2PI
        )
    return total


@dataclass(frozen=True)
class MarginalScaleReport:
    """Monte-Carlo estimates of each trait's marginal mean and variance."""

    means: tuple[np.ndarray, ...]
    variances: tuple[np.ndarray, ...]
    se_mean: tuple[np.ndarray, ...]
    se_variance: tuple[np.ndarray, ...]
    n_draws: int

    def max_abs_mean(self) -> float:
        return max(float(np.max(np.abs(m))) for m in self.means)

    def max_abs_variance_error(self) -> float:
        return max(float(np.max(np.abs(v - 1.0))) for v in self.variances)


def check_marginal_scale(
    spec: HierarchySpec,
    loadings: TraitLoadings,
    n_draws: int,
    rng: np.random.Generator,
) -> MarginalScaleReport:
    """Estimate every marginal trait mean/variance from prior draws.

    The hierarchy construction implies every marginal is N(0,1); this
    check quantifies how far a finite sample sits from that law.
    """
    if n_draws < 10_000:
        raise ValueError("need at least 10,000 draws for a stable scale check")
    state = sample_prior_traits(spec, loadings, n_draws, rng)
    means, variances, se_m, se_v = [], [], [], []
    for t in state.traits:
        mu = t.mean(axis=1)
        var = t.var(axis=1, ddof=1)
        means.append(mu)
        variances.append(var)
        se_m.append(np.sqrt(var / n_draws))
        # variance-of-sample-variance for Gaussian data: 2 sigma^4 / (n - 1)
        se_v.append(var * np.sqrt(2.0 / (n_draws - 1)))
    return MarginalScaleReport(
        tuple(means), tuple(variances), tuple(se_m), tuple(se_v), n_draws
    )


def implied_marginal_variances(spec: HierarchySpec, loadings: TraitLoadings) -> tuple[np.ndarray, ...]:
    """Exact marginal variances from the recursion var_child = lam^2 var_parent + (1 - lam^2)."""
    out = [np.ones(q) for q in spec.trait_counts]
    for k in range(spec.n_levels - 2, -1, -1):
        lam = loadings.values[k]
        parent_var = out[k + 1][list(spec.parent[k])]
        out[k] = lam**2 * parent_var + (1.0 - lam**2)
    return tuple(out)
