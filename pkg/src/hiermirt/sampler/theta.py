"""Joint draw of all trait levels per subject.

Given the augmented utilities, the traits of one subject form a Gaussian
chain: level-1 traits receive the item information, upper levels only the
structure. A backward pass folds the item information upward (Schur
marginalization), then the levels are sampled top-down from their exact
conditionals. Subjects are conditionally independent, so everything is
batched over them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import HierarchySpec, TraitLoadings

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class TraitConditional:
    """One level of the top-down factorization.

    The conditional law of this level given the one above is
    N(coef @ parent + offset, cov); the top level has coef = None.
    """

    coef: np.ndarray | None
    offset: np.ndarray
    cov: np.ndarray


def level1_information(design, obs):
    """Precision and potential contributed by the effective cells of one subject.

    design is (n_eff, Q1) with one discrimination row per contributing
    cell; obs is the matching shifted utility (X + b for dichotomous
    cells, the graded utility as-is).
    """
    design = np.atleast_2d(np.asarray(design, dtype=float))
    obs = np.asarray(obs, dtype=float)
    return design.T @ design, design.T @ obs


def _sparse_child_maps(spec: HierarchySpec, loadings: TraitLoadings):
    """Per linked level: W = D^-1 L (dense, small) and diag(L' D^-1 L)."""
    out = []
    for k in range(spec.n_levels - 1):
        lam = loadings.values[k]
        dinv = 1.0 / (1.0 - lam**2)
        w = np.zeros((spec.trait_counts[k], spec.trait_counts[k + 1]))
        rows = np.arange(spec.trait_counts[k])
        cols = np.asarray(spec.parent[k])
        w[rows, cols] = lam * dinv
        ldl = np.zeros(spec.trait_counts[k + 1])
        np.add.at(ldl, cols, lam**2 * dinv)
        out.append((dinv, w, ldl))
    return out


def trait_conditionals(
    spec: HierarchySpec,
    loadings: TraitLoadings,
    design,
    obs,
) -> list[TraitConditional]:
    """Exact per-level Gaussian conditionals for one subject, top level last.

    Returns conditionals ordered level 1 first; sampling proceeds from the
    last element (top) downward, feeding each sampled level into the coef
    term of the one below.
    """
    phi, h = level1_information(design, obs)
    maps = _sparse_child_maps(spec, loadings)
    messages = [(phi, h)]
    for k in range(spec.n_levels - 1):
        dinv, w, ldl = maps[k]
        s = np.diag(dinv) + messages[k][0]
        sinv_w = np.linalg.solve(s, w)
        sinv_h = np.linalg.solve(s, messages[k][1])
        phi_up = np.diag(ldl) - w.T @ sinv_w
        h_up = w.T @ sinv_h
        messages.append((phi_up, h_up))
    out: list[TraitConditional] = []
    for k in range(spec.n_levels - 1):
        dinv, w, _ = maps[k]
        s = np.diag(dinv) + messages[k][0]
        cov = np.linalg.inv(s)
        out.append(TraitConditional(cov @ w, cov @ messages[k][1], cov))
    k_top = spec.n_levels - 1
    prec = np.eye(spec.trait_counts[k_top]) + messages[k_top][0]
    cov = np.linalg.inv(prec)
    out.append(TraitConditional(None, cov @ messages[k_top][1], cov))
    return out


def conditional_logpdf(conditionals: list[TraitConditional], theta_levels) -> float:
    """Log density of a full per-subject trait vector under the factorization."""
    total = 0.0
    for k in range(len(conditionals) - 1, -1, -1):
        cond = conditionals[k]
        mean = cond.offset if cond.coef is None else cond.coef @ theta_levels[k + 1] + cond.offset
        resid = np.asarray(theta_levels[k], dtype=float) - mean
        sign, logdet = np.linalg.slogdet(cond.cov)
        sol = np.linalg.solve(cond.cov, resid)
        total += -0.5 * (len(resid) * _LOG_2PI + logdet + resid @ sol)
    return float(total)


def sample_trait_levels(
    spec: HierarchySpec,
    loadings: TraitLoadings,
    level1_prec,
    level1_pot,
    rng: np.random.Generator,
) -> list[np.ndarray]:
    """Draw all levels for all subjects jointly, batched over subjects.

    level1_prec is (J, Q1, Q1), level1_pot is (J, Q1): per-subject item
    information. Returns [theta_level1 (Q1, J), ..., theta_top (QK, J)].
    Subjects with no effective cells (zero information) fall back to the
    prior automatically.
    """
    level1_prec = np.asarray(level1_prec, dtype=float)
    level1_pot = np.asarray(level1_pot, dtype=float)
    n_subj = level1_pot.shape[0]
    maps = _sparse_child_maps(spec, loadings)

    phis = [level1_prec]
    pots = [level1_pot]
    s_list = []
    for k in range(spec.n_levels - 1):
        dinv, w, ldl = maps[k]
        s = np.diag(dinv)[None, :, :] + phis[k]
        s_list.append(s)
        sinv_w = np.linalg.solve(s, np.broadcast_to(w, (n_subj, *w.shape)))
        sinv_h = np.linalg.solve(s, pots[k][..., None])[..., 0]
        phis.append(np.diag(ldl)[None, :, :] - np.einsum("qp,jqr->jpr", w, sinv_w))
        pots.append(np.einsum("qp,jq->jp", w, sinv_h))

    k_top = spec.n_levels - 1
    prec_top = np.eye(spec.trait_counts[k_top])[None, :, :] + phis[k_top]
    draws: list[np.ndarray] = [np.empty(0)] * spec.n_levels
    draws[k_top] = _draw_batch(prec_top, pots[k_top], rng)
    for k in range(k_top - 1, -1, -1):
        _, w, _ = maps[k]
        parent = draws[k + 1]
        rhs = parent @ w.T + pots[k]
        draws[k] = _draw_batch(s_list[k], rhs, rng)
    return [d.T for d in draws]


def _draw_batch(prec, rhs, rng):
    """One draw per subject from N(prec^-1 rhs, prec^-1); prec is (J, Q, Q)."""
    try:
        chol = np.linalg.cholesky(prec)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"trait precision not positive definite: {exc}") from exc
    mean = np.linalg.solve(prec, rhs[..., None])[..., 0]
    z = rng.standard_normal(rhs.shape)
    step = np.linalg.solve(np.transpose(chol, (0, 2, 1)), z[..., None])[..., 0]
    return mean + step
