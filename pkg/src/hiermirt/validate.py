"""Self-contained correctness checks wrapping the oracle module.

Each check pits an implemented conditional or identity against the
brute-force references: conjugate full conditionals must differ from the
joint-density slice by a grid constant, the augmentation must marginalize
to the closed-form response probability, grids must normalize, and the
threshold reparametrization must round-trip exactly. The CLI `validate`
command runs all of them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betaln

from .hierarchy import check_marginal_scale, sample_prior_traits
from .model import (
    DichotomousItem,
    GradedItem,
    HierarchySpec,
    ItemBank,
    ResponseMatrix,
    TraitLoadings,
)
from .oracle import (
    JointModelState,
    PriorSettings,
    augmentation_marginal_check,
    grid_axis,
    grid_posterior_theta,
    logjoint_block_slice,
)
from .sampler.augment import sample_xg, sample_zx
from .sampler.conjugate import gaussian_regression_posterior
from .sampler.metropolis import (
    inverse_reparam_thresholds,
    lambda_log_conditional,
    reparam_thresholds,
)
from .sampler.theta import conditional_logpdf, trait_conditionals
from .simulate import simulate_responses

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _mvn_logpdf(x, mean, cov) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    chol = np.linalg.cholesky(cov)
    sol = np.linalg.solve(chol, x - mean)
    return float(
        -0.5 * (x.size * _LOG_2PI + sol @ sol) - np.sum(np.log(np.diag(chol)))
    )


def _beta_logpdf(x, a, b) -> float:
    return float((a - 1) * np.log(x) + (b - 1) * np.log1p(-x) - betaln(a, b))


def _fixture_state(rng: np.random.Generator) -> JointModelState:
    """Small fully-specified augmented state with every block active."""
    spec = HierarchySpec((3, 1), ((0, 0, 0),))
    loadings = TraitLoadings((np.array([0.8, 0.5, -0.3]),))
    q1 = 3
    items = (
        DichotomousItem(np.array([0.9, 0.0, 0.0]), 0.2, 0.15, (0,), q1),
        DichotomousItem(np.array([0.0, 1.1, 0.4]), -0.4, 0.10, (1, 2), q1),
        DichotomousItem(np.array([0.0, 0.0, 0.8]), 0.1, 0.20, (2,), q1),
        GradedItem(np.array([1.2, 0.0, 0.0]), np.array([-0.7, 0.6]), (0,), q1),
    )
    bank = ItemBank(items, q1)
    latent = sample_prior_traits(spec, loadings, 4, rng)
    responses = simulate_responses(bank, latent, rng)

    n_items, n_subj = responses.values.shape
    z = np.zeros((n_items, n_subj), dtype=np.int8)
    x = np.zeros((n_items, n_subj))
    xg = np.zeros((n_items, n_subj))
    theta1 = latent.traits[0]
    for i, item in enumerate(bank.items):
        if item.kind == "dichotomous":
            m = item.a @ theta1 - item.b
            zi, xi = sample_zx(responses.values[i], m, item.c, rng)
            z[i], x[i] = zi, xi
        else:
            s = item.a @ theta1
            xg[i] = sample_xg(responses.values[i].astype(int), s, item.thresholds, rng)
    return JointModelState(
        hierarchy=spec,
        loadings=loadings,
        bank=bank,
        responses=responses,
        z=z,
        x=x,
        xg=xg,
        theta=[t.copy() for t in latent.traits],
        priors=PriorSettings(),
    )


def _spread(slice_vals, cond_vals) -> float:
    diff = slice_vals - cond_vals
    return float(np.max(diff) - np.min(diff))


def check_conjugate_slices(rng: np.random.Generator, tol: float = 1e-8) -> list[CheckResult]:
    """Grid-constant checks: implemented conditionals vs joint-density slices."""
    state = _fixture_state(rng)
    out: list[CheckResult] = []
    pri = state.priors

    # guessing block of item 0
    i = 0
    obs = state.responses.observed[i]
    z_sum = int(state.z[i][obs].sum())
    n_obs = int(obs.sum())
    grid = np.linspace(0.02, 0.7, 50)
    slice_vals = logjoint_block_slice(state, ("c", i), grid)
    cond = np.array(
        [_beta_logpdf(g, z_sum + pri.c_alpha, n_obs - z_sum + pri.c_beta) for g in grid]
    )
    out.append(
        CheckResult("conjugate_slice_c", _spread(slice_vals, cond) <= tol,
                    f"spread {_spread(slice_vals, cond):.2e}")
    )

    # (a, b) block of item 1 (two free discriminations)
    i = 1
    item = state.bank.items[i]
    obs = state.responses.observed[i] & (state.z[i] == 0)
    cols = np.flatnonzero(obs)
    design = np.vstack([state.theta[0][list(item.loadings), :][:, cols], -np.ones((1, cols.size))])
    prior_mean = np.array([pri.ab_mean_a] * len(item.loadings) + [pri.ab_mean_b])
    mean, cov = gaussian_regression_posterior(
        design, state.x[i, cols], prior_mean, pri.ab_var * np.eye(len(prior_mean))
    )
    for label, block, pos in (
        ("a", ("a", i, item.loadings[0]), 0),
        ("b", ("b", i), len(item.loadings)),
    ):
        current = np.append(item.a[list(item.loadings)], item.b)
        grid = np.linspace(current[pos] - 2.0, current[pos] + 2.0, 50)
        slice_vals = logjoint_block_slice(state, block, grid)
        cond = np.empty(grid.size)
        for g, v in enumerate(grid):
            vec = current.copy()
            vec[pos] = v
            cond[g] = _mvn_logpdf(vec, mean, cov)
        out.append(
            CheckResult(f"conjugate_slice_{label}", _spread(slice_vals, cond) <= tol,
                        f"spread {_spread(slice_vals, cond):.2e}")
        )

    # graded discrimination block
    i = 3
    item = state.bank.items[i]
    obs = state.responses.observed[i]
    cols = np.flatnonzero(obs)
    design = state.theta[0][list(item.loadings), :][:, cols]
    mean, cov = gaussian_regression_posterior(
        design,
        state.xg[i, cols],
        np.full(len(item.loadings), pri.ag_mean),
        pri.ag_var * np.eye(len(item.loadings)),
    )
    grid = np.linspace(item.a[item.loadings[0]] - 2.0, item.a[item.loadings[0]] + 2.0, 50)
    slice_vals = logjoint_block_slice(state, ("ag", i, item.loadings[0]), grid)
    cond = np.array([_mvn_logpdf([v], mean, cov) for v in grid])
    out.append(
        CheckResult("conjugate_slice_ag", _spread(slice_vals, cond) <= tol,
                    f"spread {_spread(slice_vals, cond):.2e}")
    )

    # joint trait block of subject 0, varying the level-1 trait 0 coordinate
    j = 0
    design_rows, obs_vals = [], []
    for i, item in enumerate(state.bank.items):
        if not state.responses.observed[i, j]:
            continue
        if item.kind == "dichotomous":
            if state.z[i, j] == 0:
                design_rows.append(item.a)
                obs_vals.append(state.x[i, j] + item.b)
        else:
            design_rows.append(item.a)
            obs_vals.append(state.xg[i, j])
    conds = trait_conditionals(
        state.hierarchy, state.loadings, np.array(design_rows), np.array(obs_vals)
    )
    grid = np.linspace(-3.0, 3.0, 50)
    slice_vals = logjoint_block_slice(state, ("theta", 0, 0, j), grid)
    cond = np.empty(grid.size)
    for g, v in enumerate(grid):
        lev = [state.theta[k][:, j].copy() for k in range(2)]
        lev[0][0] = v
        cond[g] = conditional_logpdf(conds, lev)
    out.append(
        CheckResult("conjugate_slice_theta", _spread(slice_vals, cond) <= tol,
                    f"spread {_spread(slice_vals, cond):.2e}")
    )

    # loading block: slice minus scalar conditional is flat
    grid = np.linspace(-0.9, 0.9, 50)
    slice_vals = logjoint_block_slice(state, ("lambda", 0, 0), grid)
    child = state.theta[0][0]
    parent = state.theta[1][0]
    cond = np.array([lambda_log_conditional(v, child, parent) for v in grid])
    out.append(
        CheckResult("conjugate_slice_lambda", _spread(slice_vals, cond) <= tol,
                    f"spread {_spread(slice_vals, cond):.2e}")
    )
    return out


def check_augmentation(rng: np.random.Generator, n_draws: int = 200_000) -> CheckResult:
    worst = 0.0
    consistent = True
    for m in (-1.5, 0.0, 1.2):
        for c in (0.0, 0.2, 0.4):
            r = augmentation_marginal_check(m, c, n_draws, rng)
            worst = max(worst, r.within)
            consistent = consistent and r.roundtrip_consistent
    return CheckResult(
        "augmentation_marginal",
        bool(worst <= 4.0 and consistent),
        f"max deviation {worst:.2f} MC-SE, roundtrip {'ok' if consistent else 'BROKEN'}",
    )


def check_grid_posterior(rng: np.random.Generator) -> CheckResult:
    spec = HierarchySpec((1,))
    loadings = TraitLoadings(())
    bank = ItemBank(
        (
            DichotomousItem(np.array([1.0]), 0.0, 0.0, (0,), 1),
            DichotomousItem(np.array([0.8]), -0.3, 0.1, (0,), 1),
        ),
        1,
    )
    post = grid_posterior_theta(spec, loadings, bank, np.array([1.0, 0.0]), [grid_axis(0.0, 1.0)])
    norm_err = abs(post.normalization() - 1.0)
    prior = grid_posterior_theta(
        spec, loadings, bank, np.array([np.nan, np.nan]), [grid_axis(0.0, 1.0)]
    )
    prior_mean = abs(float(prior.mean()[0]))
    ok = norm_err < 1e-6 and prior_mean < 1e-8
    return CheckResult(
        "grid_posterior", bool(ok), f"norm error {norm_err:.1e}, empty-data mean {prior_mean:.1e}"
    )


def check_reparam_roundtrip(rng: np.random.Generator, n_trials: int = 1000) -> CheckResult:
    checked = 0
    for _ in range(n_trials):
        m = int(rng.integers(1, 9))
        t = np.sort(rng.normal(0.0, 2.0, size=m))
        if m > 1 and np.any(np.diff(t) <= 0):
            continue
        back = inverse_reparam_thresholds(reparam_thresholds(t))
        if not np.array_equal(back, t):
            return CheckResult("reparam_roundtrip", False, f"round trip drifted for {t}")
        checked += 1
    return CheckResult("reparam_roundtrip", True, f"{checked} random vectors exact to the bit")


def check_prior_scale(rng: np.random.Generator) -> CheckResult:
    spec = HierarchySpec((9, 3, 1), (tuple([0, 0, 0, 1, 1, 1, 2, 2, 2]), (0, 0, 0)))
    loadings = TraitLoadings((np.full(9, 0.95), np.full(3, 0.8)))
    report = check_marginal_scale(spec, loadings, 20_000, rng)
    mean_err = report.max_abs_mean()
    var_err = report.max_abs_variance_error()
    ok = mean_err <= 0.03 and var_err <= 0.05
    return CheckResult(
        "prior_marginal_scale", bool(ok),
        f"max |mean| {mean_err:.3f}, max |var-1| {var_err:.3f} over {report.n_draws} draws",
    )


def run_all_checks(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = [check_reparam_roundtrip(rng)]
    results += check_conjugate_slices(rng)
    results.append(check_grid_posterior(rng))
    results.append(check_augmentation(rng))
    results.append(check_prior_scale(rng))
    return results
