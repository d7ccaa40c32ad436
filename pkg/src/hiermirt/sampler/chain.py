"""Chain orchestration: blocking scheme, adaptation, tracing.

One sweep updates, in order: the dichotomous augmentation (Z, X), the
dichotomous item regressions (a, b), the loadings, all trait levels
jointly, the guessing probabilities, the graded utilities, the graded
discriminations, and the graded thresholds. Random-walk scales adapt
during burn-in only and are frozen afterwards. Everything is driven by a
single seeded generator, so a (seed, config, data) triple reproduces the
trace bit for bit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from ..model import (
    DichotomousItem,
    GradedItem,
    HierarchySpec,
    ItemBank,
    ResponseMatrix,
    TraitLoadings,
)
from ..hierarchy import validate_hierarchy
from .augment import sample_xg, sample_zx
from .conjugate import batched_gaussian_draw, batched_masked_gram
from .metropolis import adapt_step_size, sample_bg, sample_lambda
from .theta import sample_trait_levels
from .truncated import truncated_normal, truncated_normal_onesided


class ChainError(RuntimeError):
    """Numerical failure inside a sweep, annotated with iteration and block."""


@dataclass(frozen=True)
class SamplerConfig:
    """Run length, priors, proposal scales and estimation switches.

    burn_in defaults to half the iterations. Normal priors are spherical:
    the (a, b) prior centers discriminations at ab_prior_mean_a and the
    difficulty at ab_prior_mean_b with variance ab_prior_var on every free
    coordinate; the graded discrimination prior is analogous.
    """

    iterations: int = 2000
    burn_in: int | None = None
    thin: int = 1
    seed: int = 0
    estimate_items: bool = True
    estimate_guessing: bool = True
    estimate_lambda: bool = True
    ab_prior_mean_a: float = 1.0
    ab_prior_mean_b: float = 0.0
    ab_prior_var: float = 4.0
    ag_prior_mean: float = 1.0
    ag_prior_var: float = 4.0
    c_prior_alpha: float = 1.0
    c_prior_beta: float = 4.0
    lambda_step: float = 0.1
    bg_translate_step: float = 0.2
    bg_diff_step: float = 0.2
    adapt_window: int = 50
    target_accept_scalar: float = 0.44
    target_accept_vector: float = 0.234
    store_theta: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "store_theta", tuple(int(s) for s in self.store_theta))
        eff_burn = self.iterations // 2 if self.burn_in is None else self.burn_in
        if not 0 <= eff_burn <= self.iterations:
            raise ValueError("need iterations >= burn_in >= 0")
        if self.thin < 1:
            raise ValueError("thinning must be >= 1")
        for name in ("lambda_step", "bg_translate_step", "bg_diff_step"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("ab_prior_var", "ag_prior_var", "c_prior_alpha", "c_prior_beta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.adapt_window < 1:
            raise ValueError("adapt_window must be >= 1")

    @property
    def effective_burn_in(self) -> int:
        return self.iterations // 2 if self.burn_in is None else self.burn_in

    @property
    def n_kept(self) -> int:
        return len(range(self.effective_burn_in, self.iterations, self.thin))


@dataclass
class TraceGroup:
    names: list[str]
    draws: np.ndarray  # (n_kept, len(names))


@dataclass
class ChainTrace:
    """Stored draws plus bookkeeping for one chain."""

    groups: dict[str, TraceGroup]
    theta_mean: list[np.ndarray]
    accept_rates: dict[str, float]
    step_scales: dict[str, float]
    n_kept: int
    seed: int
    config: SamplerConfig
    final_items: ItemBank | None = None
    runtime_seconds: float = 0.0

    def column(self, name: str) -> np.ndarray:
        for group in self.groups.values():
            if name in group.names:
                return group.draws[:, group.names.index(name)]
        raise KeyError(name)

    def names(self) -> list[str]:
        return [n for g in self.groups.values() for n in g.names]


def initial_thresholds(scores, n_categories: int, min_gap: float = 0.05) -> np.ndarray:
    """Quantile-matched starting thresholds from observed category frequencies."""
    counts = np.bincount(np.asarray(scores, dtype=int), minlength=n_categories).astype(float)
    n = counts.sum()
    if n == 0:
        cum = np.linspace(0.0, 1.0, n_categories + 1)[1:-1]
    else:
        cum = np.cumsum(counts)[:-1] / n
    t = ndtri(np.clip(cum, 1e-4, 1.0 - 1e-4))
    for m in range(1, t.size):  # empty categories collapse quantiles; force gaps
        if t[m] <= t[m - 1] + min_gap:
            t[m] = t[m - 1] + min_gap
    return t


class _GibbsChain:
    """Mutable sweep state; built once per run_chain call."""

    def __init__(
        self,
        responses: ResponseMatrix,
        bank: ItemBank,
        hierarchy: HierarchySpec,
        config: SamplerConfig,
        loadings: TraitLoadings | None,
    ):
        responses.validate()
        if responses.n_items != bank.n_items:
            raise ValueError("response rows do not match the item bank")
        if bank.n_traits != hierarchy.trait_counts[0]:
            raise ValueError("item bank traits do not match the hierarchy's level 1")
        bad = validate_hierarchy(hierarchy)
        if bad:
            raise ValueError("invalid hierarchy: " + "; ".join(bad))
        if loadings is None:
            if not config.estimate_lambda:
                raise ValueError("fixed-loading runs must supply loadings")
            loadings = TraitLoadings(
                tuple(np.full(q, 0.5) for q in hierarchy.trait_counts[:-1])
            )
        if not loadings.matches(hierarchy):
            raise ValueError("loadings do not match the hierarchy shape")
        for s in config.store_theta:
            if not 0 <= s < responses.n_subjects:
                raise ValueError(f"store_theta subject {s} out of range")

        self.config = config
        self.hierarchy = hierarchy
        self.bank = bank
        self.rng = np.random.default_rng(config.seed)
        self.n_subjects = responses.n_subjects
        q1 = hierarchy.trait_counts[0]

        # --- dichotomous block data ---
        self.d_idx = bank.dichotomous_indices()
        d_items = [bank.items[i] for i in self.d_idx]
        self.n_dich = len(d_items)
        if self.n_dich:
            vals = responses.values[self.d_idx]
            self.d_obs = ~np.isnan(vals)
            self.d_obsf = self.d_obs.astype(float)
            self.d_y = np.where(self.d_obs, np.nan_to_num(vals), 0.0)
            self.d_y1 = self.d_y == 1
            self.d_sign = np.where(self.d_y1, 1.0, -1.0)
            self.A = np.vstack([it.a for it in d_items])
            self.b = np.array([it.b for it in d_items])
            self.c = np.array([it.c for it in d_items])
            self.d_nobs = self.d_obs.sum(axis=1)
            self.d_groups = _group_by_loadings(d_items)
            self.Z = np.zeros((self.n_dich, self.n_subjects), dtype=np.int8)
            self.X = np.zeros((self.n_dich, self.n_subjects))

        # --- graded block data ---
        self.g_idx = bank.graded_indices()
        g_items = [bank.items[i] for i in self.g_idx]
        self.n_graded = len(g_items)
        if self.n_graded:
            vals = responses.values[self.g_idx]
            self.g_obs = ~np.isnan(vals)
            self.g_obsf = self.g_obs.astype(float)
            self.g_y = np.where(self.g_obs, np.nan_to_num(vals), 0.0).astype(int)
            self.Ag = np.vstack([it.a for it in g_items])
            self.g_ncat = np.array([it.n_categories for it in g_items])
            self.thresholds = [it.thresholds.copy() for it in g_items]
            self.g_groups = _group_by_loadings(g_items)
            self.XG = np.zeros((self.n_graded, self.n_subjects))

        # --- initial values ---
        self.theta = [np.zeros((q, self.n_subjects)) for q in hierarchy.trait_counts]
        self.lam = [v.copy() for v in loadings.values]
        if config.estimate_items:
            if self.n_dich:
                self.A = np.zeros((self.n_dich, q1))
                for r, it in enumerate(d_items):
                    self.A[r, list(it.loadings)] = config.ab_prior_mean_a
                self.b = np.zeros(self.n_dich)
            if self.n_graded:
                self.Ag = np.zeros((self.n_graded, q1))
                for r, it in enumerate(g_items):
                    self.Ag[r, list(it.loadings)] = config.ag_prior_mean
                self.thresholds = [
                    initial_thresholds(self.g_y[r][self.g_obs[r]], self.g_ncat[r])
                    for r in range(self.n_graded)
                ]
        if config.estimate_guessing and self.n_dich:
            self.c = np.full(
                self.n_dich,
                config.c_prior_alpha / (config.c_prior_alpha + config.c_prior_beta),
            )
        if self.n_graded:
            self._rebuild_threshold_pad()
            self._impute_xg_all()

        self.use_guessing = self.n_dich > 0 and (
            config.estimate_guessing or bool(np.any(self.c != 0))
        )

        # --- Metropolis bookkeeping ---
        self.lam_blocks = [
            (k, q)
            for k in range(hierarchy.n_levels - 1)
            for q in range(hierarchy.trait_counts[k])
        ]
        self.lam_scale = np.full(len(self.lam_blocks), config.lambda_step)
        self.bg_t_scale = np.full(self.n_graded, config.bg_translate_step)
        self.bg_d_scale = np.full(self.n_graded, config.bg_diff_step)
        self._reset_counters()
        self.post_accepts = {}
        self.post_trials = {}

    # -- helpers ----------------------------------------------------------

    def _reset_counters(self):
        self.lam_acc = np.zeros(len(self.lam_blocks), dtype=int)
        self.lam_try = np.zeros(len(self.lam_blocks), dtype=int)
        self.bg_t_acc = np.zeros(self.n_graded, dtype=int)
        self.bg_d_acc = np.zeros(self.n_graded, dtype=int)
        self.bg_try = np.zeros(self.n_graded, dtype=int)

    def _rebuild_threshold_pad(self):
        width = int(self.g_ncat.max()) + 1
        pad = np.full((self.n_graded, width), np.inf)
        pad[:, 0] = -np.inf
        for r, t in enumerate(self.thresholds):
            pad[r, 1 : 1 + t.size] = t
        self.tpad = pad

    def _impute_xg_all(self):
        s = self.Ag @ self.theta[0]
        lo = np.take_along_axis(self.tpad, self.g_y, axis=1)
        hi = np.take_along_axis(self.tpad, self.g_y + 1, axis=1)
        draw = truncated_normal(lo, hi, s, self.rng)
        self.XG = np.where(self.g_obs, draw, 0.0)

    # -- blocks, in sweep order -------------------------------------------

    def block_zx(self):
        m = self.A @ self.theta[0] - self.b[:, None]
        if self.use_guessing:
            z, x = sample_zx(self.d_y1, m, self.c[:, None], self.rng)
        else:
            x = truncated_normal_onesided(self.d_sign, m, self.rng)
            z = self.Z  # all zero
        self.Z = np.where(self.d_obs, z, 0).astype(np.int8)
        self.X = np.where(self.d_obs & (self.Z == 0), x, 0.0)

    def block_ab(self):
        eff = self.d_obsf if not self.use_guessing else (
            self.d_obsf * (self.Z == 0)
        )
        cfg = self.config
        for rows, cols in self.d_groups:
            d = len(cols)
            design = np.vstack(
                [self.theta[0][cols, :], -np.ones((1, self.n_subjects))]
            )
            mask = eff[rows]
            gram = batched_masked_gram(design, mask)
            prior_prec = np.eye(d + 1) / cfg.ab_prior_var
            prior_mean = np.full(d + 1, cfg.ab_prior_mean_a)
            prior_mean[d] = cfg.ab_prior_mean_b
            rhs = (mask * self.X[rows]) @ design.T + prior_prec @ prior_mean
            draw = batched_gaussian_draw(prior_prec[None] + gram, rhs, self.rng)
            if d:
                self.A[rows[:, None], cols[None, :]] = draw[:, :d]
            self.b[rows] = draw[:, d]

    def block_lambda(self, adapt: bool):
        for idx, (k, q) in enumerate(self.lam_blocks):
            child = self.theta[k][q]
            parent = self.theta[k + 1][self.hierarchy.parent[k][q]]
            new, acc = sample_lambda(
                self.lam[k][q], child, parent, self.lam_scale[idx], self.rng
            )
            self.lam[k][q] = new
            self.lam_try[idx] += 1
            self.lam_acc[idx] += acc
            if not adapt:
                key = f"lambda_l{k + 1}_t{q + 1}"
                self.post_trials[key] = self.post_trials.get(key, 0) + 1
                self.post_accepts[key] = self.post_accepts.get(key, 0) + acc

    def block_theta(self):
        q1 = self.hierarchy.trait_counts[0]
        prec = np.zeros((self.n_subjects, q1, q1))
        pot = np.zeros((self.n_subjects, q1))
        if self.n_dich:
            eff = self.d_obsf if not self.use_guessing else self.d_obsf * (self.Z == 0)
            pairs = (self.A[:, :, None] * self.A[:, None, :]).reshape(self.n_dich, q1 * q1)
            prec += (eff.T @ pairs).reshape(self.n_subjects, q1, q1)
            pot += (eff * (self.X + self.b[:, None])).T @ self.A
        if self.n_graded:
            pairs = (self.Ag[:, :, None] * self.Ag[:, None, :]).reshape(
                self.n_graded, q1 * q1
            )
            prec += (self.g_obsf.T @ pairs).reshape(self.n_subjects, q1, q1)
            pot += (self.g_obsf * self.XG).T @ self.Ag
        loadings = TraitLoadings(tuple(self.lam))
        self.theta = sample_trait_levels(self.hierarchy, loadings, prec, pot, self.rng)

    def block_c(self):
        z_sums = (self.Z * self.d_obs).sum(axis=1)
        self.c = self.rng.beta(
            z_sums + self.config.c_prior_alpha,
            self.d_nobs - z_sums + self.config.c_prior_beta,
        )

    def block_xg(self):
        self._impute_xg_all()

    def block_ag(self):
        cfg = self.config
        for rows, cols in self.g_groups:
            d = len(cols)
            design = self.theta[0][cols, :]
            mask = self.g_obsf[rows]
            gram = batched_masked_gram(design, mask)
            prior_prec = np.eye(d) / cfg.ag_prior_var
            prior_mean = np.full(d, cfg.ag_prior_mean)
            rhs = (mask * self.XG[rows]) @ design.T + prior_prec @ prior_mean
            draw = batched_gaussian_draw(prior_prec[None] + gram, rhs, self.rng)
            self.Ag[rows[:, None], cols[None, :]] = draw

    def block_bg(self, adapt: bool):
        for r in range(self.n_graded):
            obs = self.g_obs[r]
            scores = self.g_y[r][obs]
            linpred = self.Ag[r] @ self.theta[0][:, obs]
            new_t, (acc1, acc2) = sample_bg(
                self.thresholds[r],
                scores,
                linpred,
                self.bg_t_scale[r],
                self.bg_d_scale[r],
                self.rng,
            )
            self.bg_try[r] += 1
            self.bg_t_acc[r] += acc1
            self.bg_d_acc[r] += acc2
            if not adapt:
                item = self.g_idx[r] + 1
                for key, acc in (
                    (f"bg_i{item}_translate", acc1),
                    (f"bg_i{item}_diff", acc2),
                ):
                    self.post_trials[key] = self.post_trials.get(key, 0) + 1
                    self.post_accepts[key] = self.post_accepts.get(key, 0) + acc
            if acc1 or acc2:
                self.thresholds[r] = new_t
                self.tpad[r, 1 : 1 + new_t.size] = new_t
                draw = sample_xg(scores, linpred, new_t, self.rng)
                row = self.XG[r]
                row[obs] = draw
                # collapsed move: utilities must be refreshed under the new cuts

    def adapt_scales(self):
        cfg = self.config
        window = cfg.adapt_window
        for idx in range(len(self.lam_blocks)):
            rate = self.lam_acc[idx] / max(self.lam_try[idx], 1)
            self.lam_scale[idx] = adapt_step_size(
                rate, self.lam_scale[idx], cfg.target_accept_scalar
            )
        for r in range(self.n_graded):
            tries = max(self.bg_try[r], 1)
            self.bg_t_scale[r] = adapt_step_size(
                self.bg_t_acc[r] / tries, self.bg_t_scale[r], cfg.target_accept_scalar
            )
            target = (
                cfg.target_accept_vector if self.g_ncat[r] - 2 > 1 else cfg.target_accept_scalar
            )
            if self.g_ncat[r] > 2:
                self.bg_d_scale[r] = adapt_step_size(
                    self.bg_d_acc[r] / tries, self.bg_d_scale[r], target
                )
        self._reset_counters()


def _group_by_loadings(items) -> list[tuple[np.ndarray, np.ndarray]]:
    groups: dict[tuple[int, ...], list[int]] = {}
    for r, it in enumerate(items):
        groups.setdefault(it.loadings, []).append(r)
    return [
        (np.asarray(rows), np.asarray(cols, dtype=int))
        for cols, rows in sorted(groups.items())
    ]


def run_chain(
    responses: ResponseMatrix,
    bank: ItemBank,
    hierarchy: HierarchySpec,
    config: SamplerConfig,
    loadings: TraitLoadings | None = None,
    sweep_hook=None,
) -> ChainTrace:
    """Run one chain and return its trace.

    bank supplies the item structure plus fixed parameter values when
    estimate_items/estimate_guessing are off and initial loadings come
    from `loadings` (required when estimate_lambda is off). sweep_hook,
    if given, is called as sweep_hook(iteration, chain) after every sweep
    with the internal chain object; intended for invariant checks.
    """
    t_start = time.perf_counter()
    chain = _GibbsChain(responses, bank, hierarchy, config, loadings)
    cfg = config
    burn = cfg.effective_burn_in
    n_kept = cfg.n_kept

    names_lambda = [f"lambda_l{k + 1}_t{q + 1}" for k, q in chain.lam_blocks]
    names_a, names_b, names_c, names_ag, names_bg, names_theta = [], [], [], [], [], []
    if chain.n_dich:
        for r, i in enumerate(chain.d_idx):
            item = bank.items[i]
            names_a += [f"a_i{i + 1}_t{t + 1}" for t in item.loadings]
            names_b.append(f"b_i{i + 1}")
            names_c.append(f"c_i{i + 1}")
    if chain.n_graded:
        for r, i in enumerate(chain.g_idx):
            item = bank.items[i]
            names_ag += [f"ag_i{i + 1}_t{t + 1}" for t in item.loadings]
            names_bg += [f"bg_i{i + 1}_m{m + 1}" for m in range(item.n_categories - 1)]
    for s in cfg.store_theta:
        for k, q in enumerate(hierarchy.trait_counts):
            names_theta += [f"theta_l{k + 1}_t{t + 1}_s{s + 1}" for t in range(q)]

    groups = {"lambda": TraceGroup(names_lambda, np.empty((n_kept, len(names_lambda))))}
    if chain.n_dich:
        groups["dich_a"] = TraceGroup(names_a, np.empty((n_kept, len(names_a))))
        groups["dich_b"] = TraceGroup(names_b, np.empty((n_kept, len(names_b))))
        if cfg.estimate_guessing:
            groups["guessing"] = TraceGroup(names_c, np.empty((n_kept, len(names_c))))
    if chain.n_graded:
        groups["graded_a"] = TraceGroup(names_ag, np.empty((n_kept, len(names_ag))))
        groups["graded_b"] = TraceGroup(names_bg, np.empty((n_kept, len(names_bg))))
    if names_theta:
        groups["theta"] = TraceGroup(names_theta, np.empty((n_kept, len(names_theta))))

    a_cols = [
        (r, t)
        for r, i in enumerate(chain.d_idx)
        for t in bank.items[i].loadings
    ]
    ag_cols = [
        (r, t)
        for r, i in enumerate(chain.g_idx)
        for t in bank.items[i].loadings
    ]

    theta_sum = [np.zeros_like(t) for t in chain.theta]
    kept = 0
    block = "init"
    try:
        for t_iter in range(cfg.iterations):
            adapting = t_iter < burn
            if chain.n_dich:
                block = "zx"
                chain.block_zx()
                if cfg.estimate_items:
                    block = "ab"
                    chain.block_ab()
            if cfg.estimate_lambda and chain.lam_blocks:
                block = "lambda"
                chain.block_lambda(adapting)
            block = "theta"
            chain.block_theta()
            if chain.n_dich and cfg.estimate_guessing:
                block = "c"
                chain.block_c()
            if chain.n_graded:
                block = "xg"
                chain.block_xg()
                if cfg.estimate_items:
                    block = "ag"
                    chain.block_ag()
                    block = "bg"
                    chain.block_bg(adapting)
            if adapting and (t_iter + 1) % cfg.adapt_window == 0:
                chain.adapt_scales()
            if t_iter == burn - 1:
                chain._reset_counters()
            if t_iter >= burn and (t_iter - burn) % cfg.thin == 0:
                block = "record"
                groups["lambda"].draws[kept] = [
                    chain.lam[k][q] for k, q in chain.lam_blocks
                ]
                if chain.n_dich:
                    groups["dich_a"].draws[kept] = [chain.A[r, t] for r, t in a_cols]
                    groups["dich_b"].draws[kept] = chain.b
                    if cfg.estimate_guessing:
                        groups["guessing"].draws[kept] = chain.c
                if chain.n_graded:
                    groups["graded_a"].draws[kept] = [chain.Ag[r, t] for r, t in ag_cols]
                    groups["graded_b"].draws[kept] = np.concatenate(chain.thresholds)
                if names_theta:
                    groups["theta"].draws[kept] = np.concatenate(
                        [
                            np.concatenate([lvl[:, s] for lvl in chain.theta])
                            for s in cfg.store_theta
                        ]
                    )
                for acc, lvl in zip(theta_sum, chain.theta):
                    acc += lvl
                kept += 1
            if sweep_hook is not None:
                sweep_hook(t_iter, chain)
    except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        raise ChainError(f"iteration {t_iter}, block {block}: {exc}") from exc

    theta_mean = [s / kept if kept else s for s in theta_sum]
    accept_rates = {
        key: chain.post_accepts[key] / chain.post_trials[key]
        for key in sorted(chain.post_trials)
    }
    step_scales = {
        f"lambda_l{k + 1}_t{q + 1}": float(chain.lam_scale[i])
        for i, (k, q) in enumerate(chain.lam_blocks)
    }
    for r in range(chain.n_graded):
        item = chain.g_idx[r] + 1
        step_scales[f"bg_i{item}_translate"] = float(chain.bg_t_scale[r])
        step_scales[f"bg_i{item}_diff"] = float(chain.bg_d_scale[r])

    final_items = _bank_from_state(bank, chain)
    return ChainTrace(
        groups=groups,
        theta_mean=theta_mean,
        accept_rates=accept_rates,
        step_scales=step_scales,
        n_kept=kept,
        seed=cfg.seed,
        config=cfg,
        final_items=final_items,
        runtime_seconds=time.perf_counter() - t_start,
    )


def _bank_from_state(bank: ItemBank, chain: _GibbsChain) -> ItemBank:
    items = list(bank.items)
    for r, i in enumerate(chain.d_idx):
        it = bank.items[i]
        items[i] = DichotomousItem(
            chain.A[r].copy(), float(chain.b[r]), float(chain.c[r]), it.loadings, it.n_traits
        )
    for r, i in enumerate(chain.g_idx):
        it = bank.items[i]
        items[i] = GradedItem(
            chain.Ag[r].copy(), chain.thresholds[r].copy(), it.loadings, it.n_traits
        )
    return ItemBank(tuple(items), bank.n_traits)
