"""Core types and response-probability functions.

Latent traits live on K levels: level 1 is measured by the items, each
higher level aggregates the one below it through a sparse loading pattern
(every child trait has exactly one parent). Items are dichotomous
(3-parameter probit) or graded (ordered categories with cumulative probit
thresholds). Response probabilities depend on level-1 traits only; upper
levels enter through the prior.

All trait, item and subject indices are 0-based in code; the file formats
in :mod:`hiermirt.io` use 1-based indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.special import log_ndtr, ndtr

DICHOTOMOUS = "dichotomous"
GRADED = "graded"

_LOG_HALF_TAIL = float(log_ndtr(0.0))  # log(1/2), sanity anchor for tests


class InvalidParameterError(ValueError):
    """Model parameters violate a structural constraint (e.g. unordered thresholds)."""


# ---------------------------------------------------------------------------
# Structural types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HierarchySpec:
    """Shape of the latent-trait tree.

    trait_counts
        (Q_1, ..., Q_K): number of traits on each level, level 1 first.
    parent
        parent[k][q] is the (0-based) index of the level-(k+2) parent of
        trait q on level k+1, for k = 0..K-2. Empty for K = 1.
    """

    trait_counts: tuple[int, ...]
    parent: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        counts = tuple(int(q) for q in self.trait_counts)
        object.__setattr__(self, "trait_counts", counts)
        object.__setattr__(
            self, "parent", tuple(tuple(int(p) for p in row) for row in self.parent)
        )
        if len(self.parent) != max(len(counts) - 1, 0):
            raise ValueError(
                f"parent map has {len(self.parent)} levels, expected {len(counts) - 1}"
            )
        for k, row in enumerate(self.parent):
            if len(row) != counts[k]:
                raise ValueError(
                    f"parent map for level {k + 1} has {len(row)} entries, "
                    f"expected {counts[k]}"
                )

    @property
    def n_levels(self) -> int:
        return len(self.trait_counts)

    @property
    def n_traits_total(self) -> int:
        return sum(self.trait_counts)


@dataclass(frozen=True)
class TraitLoadings:
    """Loading coefficients linking each child trait to its unique parent.

    values[k][q] is the coefficient for trait q on level k+1, k = 0..K-2.
    Only the on-pattern scalars are stored; the dense coefficient matrix is
    never materialized. |value| < 1 keeps the child's error variance
    1 - value**2 positive.
    """

    values: tuple[np.ndarray, ...]

    def __post_init__(self):
        vals = tuple(np.asarray(v, dtype=float) for v in self.values)
        object.__setattr__(self, "values", vals)
        for k, v in enumerate(vals):
            if v.ndim != 1:
                raise InvalidParameterError(f"loading level {k + 1} is not a vector")
            if not np.all(np.isfinite(v)):
                raise InvalidParameterError(f"non-finite loading on level {k + 1}")
            if np.any(np.abs(v) >= 1.0):
                raise InvalidParameterError(
                    f"|loading| must be < 1 on level {k + 1}, got {v}"
                )

    @staticmethod
    def zeros(spec: HierarchySpec) -> "TraitLoadings":
        return TraitLoadings(tuple(np.zeros(q) for q in spec.trait_counts[:-1]))

    def matches(self, spec: HierarchySpec) -> bool:
        return len(self.values) == spec.n_levels - 1 and all(
            len(v) == spec.trait_counts[k] for k, v in enumerate(self.values)
        )


@dataclass(frozen=True)
class LatentState:
    """All trait values: traits[k] has shape (Q_{k+1-th level}, n_subjects)."""

    traits: tuple[np.ndarray, ...]

    def __post_init__(self):
        arrs = tuple(np.asarray(t, dtype=float) for t in self.traits)
        object.__setattr__(self, "traits", arrs)
        if not arrs:
            raise ValueError("at least one level required")
        n = arrs[0].shape[1] if arrs[0].ndim == 2 else -1
        for k, t in enumerate(arrs):
            if t.ndim != 2 or t.shape[1] != n:
                raise ValueError(f"level {k + 1} traits must be (Q, J) with shared J")
            if not np.all(np.isfinite(t)):
                raise ValueError(f"non-finite trait value on level {k + 1}")

    @property
    def n_subjects(self) -> int:
        return self.traits[0].shape[1]

    def consistent_with(self, spec: HierarchySpec) -> bool:
        return len(self.traits) == spec.n_levels and all(
            t.shape[0] == q for t, q in zip(self.traits, spec.trait_counts)
        )


# ---------------------------------------------------------------------------
# Items
# ---------------------------------------------------------------------------


def _loading_vector(a, n_traits: int, loadings: tuple[int, ...]) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape != (n_traits,):
        raise InvalidParameterError(f"discrimination vector must have length {n_traits}")
    off = np.ones(n_traits, dtype=bool)
    off[list(loadings)] = False
    if np.any(a[off] != 0.0):
        raise InvalidParameterError("discrimination non-zero outside the loading set")
    return a


@dataclass(frozen=True)
class DichotomousItem:
    """3-parameter probit item: P(correct) = c + (1-c) Phi(a.theta - b)."""

    a: np.ndarray
    b: float
    c: float
    loadings: tuple[int, ...]
    n_traits: int

    def __post_init__(self):
        object.__setattr__(self, "loadings", tuple(sorted(set(self.loadings))))
        object.__setattr__(
            self, "a", _loading_vector(self.a, self.n_traits, self.loadings)
        )
        if not (np.isfinite(self.b) and np.isfinite(self.c)):
            raise InvalidParameterError("non-finite item parameter")
        if not 0.0 <= self.c < 1.0:
            raise InvalidParameterError(f"pseudo-guessing must be in [0, 1), got {self.c}")

    @property
    def kind(self) -> str:
        return DICHOTOMOUS

    @property
    def n_categories(self) -> int:
        return 2


@dataclass(frozen=True)
class GradedItem:
    """Graded-response item with strictly increasing thresholds (no guessing)."""

    a: np.ndarray
    thresholds: np.ndarray
    loadings: tuple[int, ...]
    n_traits: int

    def __post_init__(self):
        object.__setattr__(self, "loadings", tuple(sorted(set(self.loadings))))
        object.__setattr__(
            self, "a", _loading_vector(self.a, self.n_traits, self.loadings)
        )
        t = np.asarray(self.thresholds, dtype=float)
        object.__setattr__(self, "thresholds", t)
        if t.ndim != 1 or t.size < 1:
            raise InvalidParameterError("at least one threshold required")
        if not np.all(np.isfinite(t)):
            raise InvalidParameterError("non-finite threshold")
        if np.any(np.diff(t) <= 0):
            raise InvalidParameterError(f"thresholds must be strictly increasing, got {t}")

    @property
    def kind(self) -> str:
        return GRADED

    @property
    def n_categories(self) -> int:
        return self.thresholds.size + 1


Item = Union[DichotomousItem, GradedItem]


@dataclass(frozen=True)
class ItemBank:
    """Ordered collection of items measuring the same level-1 trait space."""

    items: tuple[Item, ...]
    n_traits: int

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        for i, item in enumerate(self.items):
            if item.n_traits != self.n_traits:
                raise InvalidParameterError(f"item {i} declared over {item.n_traits} traits")

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(item.kind for item in self.items)

    @property
    def n_categories(self) -> tuple[int, ...]:
        return tuple(item.n_categories for item in self.items)

    def dichotomous_indices(self) -> list[int]:
        return [i for i, it in enumerate(self.items) if it.kind == DICHOTOMOUS]

    def graded_indices(self) -> list[int]:
        return [i for i, it in enumerate(self.items) if it.kind == GRADED]


def apply_echelon_restriction(bank: ItemBank) -> ItemBank:
    """Zero the upper-triangle discriminations of the first Q1-1 items.

    Item i (i = 0..Q1-2) loses traits i+1..Q1-1 from its loading set; the
    corresponding a entries are forced to zero. Standard echelon-form
    identifiability restriction for genuinely multidimensional banks.
    """
    q1 = bank.n_traits
    new_items: list[Item] = []
    for i, item in enumerate(bank.items):
        if i < q1 - 1:
            keep = tuple(t for t in item.loadings if t <= i)
            a = item.a.copy()
            a[i + 1 :] = 0.0
            if isinstance(item, DichotomousItem):
                item = DichotomousItem(a, item.b, item.c, keep, bank.n_traits)
            else:
                item = GradedItem(a, item.thresholds, keep, bank.n_traits)
        new_items.append(item)
    return ItemBank(tuple(new_items), bank.n_traits)


# ---------------------------------------------------------------------------
# Responses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ResponseMatrix:
    """Observed responses, items x subjects. NaN marks a missing cell.

    Dichotomous cells hold 0/1; graded cells hold integer scores in
    0..M_i-1 where M_i is the item's category count.
    """

    values: np.ndarray
    kinds: tuple[str, ...]
    n_categories: tuple[int, ...]

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "kinds", tuple(self.kinds))
        object.__setattr__(self, "n_categories", tuple(int(m) for m in self.n_categories))
        if v.ndim != 2:
            raise ValueError("responses must be a 2-D items x subjects array")
        if len(self.kinds) != v.shape[0] or len(self.n_categories) != v.shape[0]:
            raise ValueError("per-item kind/category metadata does not match row count")

    @property
    def n_items(self) -> int:
        return self.values.shape[0]

    @property
    def n_subjects(self) -> int:
        return self.values.shape[1]

    @property
    def observed(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def validate(self) -> None:
        obs = self.observed
        if not obs.any(axis=1).all():
            bad = int(np.flatnonzero(~obs.any(axis=1))[0])
            raise ValueError(f"item {bad} has no observed responses")
        if not obs.any(axis=0).all():
            bad = int(np.flatnonzero(~obs.any(axis=0))[0])
            raise ValueError(f"subject {bad} has no observed responses")
        for i, (kind, m) in enumerate(zip(self.kinds, self.n_categories)):
            row = self.values[i][obs[i]]
            if np.any(row != np.floor(row)):
                raise ValueError(f"item {i} has non-integer responses")
            hi = 1 if kind == DICHOTOMOUS else m - 1
            if row.size and (row.min() < 0 or row.max() > hi):
                raise ValueError(f"item {i} has scores outside 0..{hi}")

    @staticmethod
    def from_bank(values, bank: ItemBank) -> "ResponseMatrix":
        rm = ResponseMatrix(values, bank.kinds, bank.n_categories)
        if rm.n_items != bank.n_items:
            raise ValueError("response rows do not match the item bank")
        return rm


# ---------------------------------------------------------------------------
# Response probabilities and log-likelihoods
# ---------------------------------------------------------------------------


def prob_correct(a, theta1, b: float, c: float) -> float:
    """Probability of a correct response: c + (1-c) Phi(a.theta1 - b)."""
    a = np.asarray(a, dtype=float)
    theta1 = np.asarray(theta1, dtype=float)
    m = float(a @ theta1 - b)
    if not np.isfinite(m) or not np.isfinite(c):
        raise ValueError("non-finite inputs to prob_correct")
    if not 0.0 <= c < 1.0:
        raise ValueError(f"pseudo-guessing must be in [0, 1), got {c}")
    return c + (1.0 - c) * float(ndtr(m))


def grm_category_probs(a, theta1, thresholds) -> np.ndarray:
    """Category probabilities Phi(b_m - a.theta1) - Phi(b_{m-1} - a.theta1).

    Element m (0-based) is the mass of score m; the implicit outer
    thresholds are -inf and +inf. The result is a simplex point.
    """
    t = np.asarray(thresholds, dtype=float)
    if t.ndim != 1 or np.any(np.diff(t) <= 0):
        raise InvalidParameterError(f"thresholds must be strictly increasing, got {t}")
    a = np.asarray(a, dtype=float)
    theta1 = np.asarray(theta1, dtype=float)
    s = float(a @ theta1)
    cdf = np.concatenate(([0.0], ndtr(t - s), [1.0]))
    return np.maximum(np.diff(cdf), 0.0)


def log_interval_mass(lo, hi):
    """log(Phi(hi) - Phi(lo)) for standard-normal bounds, stable in the tails.

    Works elementwise; bounds may be -inf/+inf. Reflects the interval into
    the lower tail so only small CDF values are subtracted.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    flip = hi > -lo  # interval midpoint above 0: reflect
    a = np.where(flip, -hi, lo)
    b = np.where(flip, -lo, hi)
    la = log_ndtr(a)
    lb = log_ndtr(b)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = lb + np.log1p(-np.exp(la - lb))
    # empty interval (lo == hi) gives la == lb -> log1p(-1) = -inf, as wanted
    return np.where(la == lb, -np.inf, out)


def dichotomous_cell_loglik(m, c, y):
    """Elementwise log-probability of a 0/1 response at linear predictor m.

    Uses log Phi throughout so far-tail predictors give a -inf sentinel
    rather than overflow or NaN.
    """
    m = np.asarray(m, dtype=float)
    c = np.asarray(c, dtype=float)
    y = np.asarray(y)
    with np.errstate(divide="ignore"):
        log_c = np.log(c)
        log_1mc = np.log1p(-c)
    lp1 = np.logaddexp(log_c, log_1mc + log_ndtr(m))  # log(c + (1-c)Phi(m))
    lp0 = log_1mc + log_ndtr(-m)  # log((1-c)Phi(-m))
    return np.where(y == 1, lp1, lp0)


def loglik_dichotomous(responses: ResponseMatrix, bank: ItemBank, theta1) -> float:
    """Sum of dichotomous log-likelihood terms over observed cells.

    Missing cells contribute nothing. theta1 is the (Q1, J) level-1 trait
    matrix. Cells whose probability underflows against the observed
    response yield -inf, never an exception.
    """
    theta1 = np.asarray(theta1, dtype=float)
    total = 0.0
    for i, item in enumerate(bank.items):
        if item.kind != DICHOTOMOUS:
            continue
        obs = responses.observed[i]
        if not obs.any():
            continue
        m = item.a @ theta1[:, obs] - item.b
        y = responses.values[i, obs]
        total += float(np.sum(dichotomous_cell_loglik(m, item.c, y)))
    return total


def loglik_graded(responses: ResponseMatrix, bank: ItemBank, theta1) -> float:
    """Sum of graded-response log-likelihood terms over observed cells."""
    theta1 = np.asarray(theta1, dtype=float)
    total = 0.0
    for i, item in enumerate(bank.items):
        if item.kind != GRADED:
            continue
        obs = responses.observed[i]
        if not obs.any():
            continue
        s = item.a @ theta1[:, obs]
        y = responses.values[i, obs].astype(int)
        tpad = np.concatenate(([-np.inf], item.thresholds, [np.inf]))
        total += float(np.sum(log_interval_mass(tpad[y] - s, tpad[y + 1] - s)))
    return total


def loglik(responses: ResponseMatrix, bank: ItemBank, theta1) -> float:
    """Joint log-likelihood of all observed responses."""
    return loglik_dichotomous(responses, bank, theta1) + loglik_graded(
        responses, bank, theta1
    )
