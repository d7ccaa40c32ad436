"""Scikit-learn style front end for the hierarchical IRT sampler.

`HierarchicalIRT` treats subjects as samples and items as features:
``fit(X)`` runs the posterior sampler on an (n_subjects, n_items)
response matrix (NaN marks missing cells) and ``transform`` maps subjects
to posterior-mean latent traits, so the model drops into pipelines next
to any other transformer.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .model import HierarchySpec, ItemBank, ResponseMatrix, TraitLoadings
from .sampler.chain import SamplerConfig, run_chain


def _check_responses(X, bank: ItemBank) -> ResponseMatrix:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("responses must be 2-D (n_subjects, n_items)")
    if X.shape[1] != bank.n_items:
        raise ValueError(
            f"got {X.shape[1]} item columns, the item bank declares {bank.n_items}"
        )
    rm = ResponseMatrix.from_bank(X.T, bank)
    rm.validate()
    return rm


class HierarchicalIRT(BaseEstimator, TransformerMixin):
    """Bayesian hierarchical multidimensional IRT estimator.

    Parameters
    ----------
    hierarchy : HierarchySpec
        Latent-trait tree (level-1 traits are measured by the items).
    items : ItemBank
        Item structure; parameter values are used as fixed truths when
        estimate_items is False and ignored otherwise.
    iterations, burn_in, thin, seed : run-length controls.
    estimate_items, estimate_guessing, estimate_lambda : estimation switches.
    loadings : TraitLoadings or None
        Fixed loadings (required when estimate_lambda is False).

    Attributes
    ----------
    trace_ : ChainTrace of the fitted chain.
    lambda_mean_ : posterior-mean loading per child trait, level by level.
    theta_mean_ : per-level (Q_k, n_subjects) posterior-mean traits.
    items_posterior_ : ItemBank holding the final item-parameter state.
    """

    def __init__(
        self,
        hierarchy: HierarchySpec = None,
        items: ItemBank = None,
        iterations: int = 2000,
        burn_in: int | None = None,
        thin: int = 1,
        seed: int = 0,
        estimate_items: bool = True,
        estimate_guessing: bool = True,
        estimate_lambda: bool = True,
        loadings: TraitLoadings | None = None,
    ):
        self.hierarchy = hierarchy
        self.items = items
        self.iterations = iterations
        self.burn_in = burn_in
        self.thin = thin
        self.seed = seed
        self.estimate_items = estimate_items
        self.estimate_guessing = estimate_guessing
        self.estimate_lambda = estimate_lambda
        self.loadings = loadings

    def _config(self, seed: int) -> SamplerConfig:
        return SamplerConfig(
            iterations=self.iterations,
            burn_in=self.burn_in,
            thin=self.thin,
            seed=seed,
            estimate_items=self.estimate_items,
            estimate_guessing=self.estimate_guessing,
            estimate_lambda=self.estimate_lambda,
        )

    def fit(self, X, y=None):
        if self.hierarchy is None or self.items is None:
            raise ValueError("hierarchy and items are required to fit")
        responses = _check_responses(X, self.items)
        trace = run_chain(
            responses, self.items, self.hierarchy, self._config(self.seed), self.loadings
        )
        self.trace_ = trace
        self.theta_mean_ = trace.theta_mean
        self.items_posterior_ = trace.final_items
        lam_group = trace.groups["lambda"]
        if trace.n_kept:
            means = lam_group.draws.mean(axis=0)
        else:
            means = np.full(len(lam_group.names), np.nan)
        self.lambda_mean_ = []
        pos = 0
        for q in self.hierarchy.trait_counts[:-1]:
            self.lambda_mean_.append(means[pos : pos + q])
            pos += q
        self.n_features_in_ = self.items.n_items
        return self

    def _fitted(self) -> None:
        if not hasattr(self, "trace_"):
            raise NotFittedError("fit the estimator before calling transform/score")

    def transform(self, X=None):
        """Posterior-mean traits, (n_subjects, total traits), level 1 first.

        With X=None the training subjects are returned. A new response
        matrix triggers a scoring run: items and loadings are pinned at
        their posterior states and only traits are sampled.
        """
        self._fitted()
        if X is None:
            return np.vstack(self.theta_mean_).T
        responses = _check_responses(X, self.items_posterior_)
        lam = TraitLoadings(
            tuple(np.asarray(v, dtype=float) for v in self.lambda_mean_)
        )
        cfg = SamplerConfig(
            iterations=max(200, self.iterations // 4),
            thin=1,
            seed=self.seed + 1,
            estimate_items=False,
            estimate_guessing=False,
            estimate_lambda=False,
        )
        trace = run_chain(responses, self.items_posterior_, self.hierarchy, cfg, lam)
        return np.vstack(trace.theta_mean).T

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X, y).transform()
