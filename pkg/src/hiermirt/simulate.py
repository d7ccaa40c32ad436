"""Synthetic dataset generation with retained ground truth.

Eight preset designs cover the standard recovery studies (sample-size
sweeps, boundary cases with uncorrelated or unidimensional data, and a
mixed dichotomous/graded design with cross-loading items and guessing);
arbitrary designs use the same machinery. The generator keeps the exact
latent traits, item parameters and loadings so recovery can always be
scored.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr

from .hierarchy import sample_prior_traits
from .model import (
    DICHOTOMOUS,
    DichotomousItem,
    GradedItem,
    HierarchySpec,
    ItemBank,
    LatentState,
    ResponseMatrix,
    TraitLoadings,
)

GUESSING_ZERO = "zero"
GUESSING_UNIFORM = "uniform"
GUESSING_FIXED = "fixed"


@dataclass(frozen=True)
class GradedItemDesign:
    """One graded item: its home trait, category count, extra loaded traits."""

    trait: int
    n_categories: int
    extra_traits: tuple[int, ...] = ()


@dataclass(frozen=True)
class SimulationDesign:
    """Everything needed to generate one dataset and describe its fit.

    dich_per_trait[q] unidimensional dichotomous items load on trait q;
    cross_loadings adds (dichotomous item index -> extra trait) pairs on
    top. guessing_mode is one of zero | uniform | fixed; uniform draws
    each c from Uniform(0, 0.2), fixed uses guessing_value for every item.
    fix_items_at_truth and fit_lambda describe the intended fit: items
    pinned to their generating values, and loadings either estimated
    (None) or pinned to the given vector per child level.
    """

    hierarchy: HierarchySpec
    loadings: TraitLoadings
    n_subjects: int
    dich_per_trait: tuple[int, ...]
    graded: tuple[GradedItemDesign, ...] = ()
    cross_loadings: tuple[tuple[int, int], ...] = ()
    guessing_mode: str = GUESSING_ZERO
    guessing_value: float = 0.0
    fix_items_at_truth: bool = False
    fit_lambda: tuple[float, ...] | None = None
    a_low: float = 0.7
    a_high: float = 1.3
    b_sd: float = 1.0
    threshold_sd: float = 1.5
    threshold_min_gap: float = 0.3

    def __post_init__(self):
        q1 = self.hierarchy.trait_counts[0]
        if len(self.dich_per_trait) != q1:
            raise ValueError(f"dich_per_trait must have {q1} entries")
        if not self.loadings.matches(self.hierarchy):
            raise ValueError("loadings do not match the hierarchy")
        if self.guessing_mode not in (GUESSING_ZERO, GUESSING_UNIFORM, GUESSING_FIXED):
            raise ValueError(f"unknown guessing mode {self.guessing_mode!r}")
        n_dich = sum(self.dich_per_trait)
        for item, trait in self.cross_loadings:
            if not 0 <= item < n_dich:
                raise ValueError(f"cross-loading references missing item {item}")
            if not 0 <= trait < q1:
                raise ValueError(f"cross-loading references missing trait {trait}")
        for g in self.graded:
            for t in (g.trait, *g.extra_traits):
                if not 0 <= t < q1:
                    raise ValueError(f"graded item references missing trait {t}")
            if g.n_categories < 2:
                raise ValueError("graded items need at least two categories")

    @property
    def n_dichotomous(self) -> int:
        return sum(self.dich_per_trait)

    @property
    def n_items(self) -> int:
        return self.n_dichotomous + len(self.graded)


@dataclass(frozen=True)
class TruthBundle:
    """Generating values retained for recovery scoring."""

    latent: LatentState
    items: ItemBank
    loadings: TraitLoadings


@dataclass(frozen=True)
class SimulatedDataset:
    responses: ResponseMatrix
    truth: TruthBundle
    design: SimulationDesign


_FOUR_TRAIT = HierarchySpec((4, 1), ((0, 0, 0, 0),))
_LAMBDA_TRUE = (0.95, 0.90, 0.85, 0.80)


def _design_1to3(n_subjects: int) -> SimulationDesign:
    return SimulationDesign(
        hierarchy=_FOUR_TRAIT,
        loadings=TraitLoadings((np.array(_LAMBDA_TRUE),)),
        n_subjects=n_subjects,
        dich_per_trait=(45, 45, 45, 45),
    )


def preset_design(preset: int) -> SimulationDesign:
    """Return one of the eight standard designs (1-based id)."""
    if preset in (1, 2, 3):
        return _design_1to3({1: 500, 2: 2000, 3: 5000}[preset])
    if preset == 4:  # hierarchical data, fit forced uncorrelated
        return replace(
            _design_1to3(5000), fix_items_at_truth=True, fit_lambda=(0.0, 0.0, 0.0, 0.0)
        )
    if preset == 5:  # uncorrelated data, hierarchical fit
        return replace(
            _design_1to3(5000),
            loadings=TraitLoadings((np.zeros(4),)),
            fix_items_at_truth=True,
        )
    if preset == 6:  # unidimensional data (loading -> 1 limit), hierarchical fit
        return replace(
            _design_1to3(5000),
            loadings=TraitLoadings((np.full(4, 0.999),)),
            fix_items_at_truth=True,
        )
    if preset == 7:  # hierarchical data and fit, items fixed
        return replace(_design_1to3(5000), fix_items_at_truth=True)
    if preset == 8:
        hierarchy = HierarchySpec((5, 1), ((0, 0, 0, 0, 0),))
        # traits 1-4 carry 45 dichotomous items each; trait 5 is measured
        # by the five graded items, the first of which also loads trait 1
        cross = tuple((45 + i, 0) for i in range(5))
        cross += tuple((90 + i, 0) for i in range(5))
        cross += tuple((135 + i, 0) for i in range(6))
        graded = (GradedItemDesign(4, 5, (0,)),) + tuple(
            GradedItemDesign(4, 5) for _ in range(4)
        )
        return SimulationDesign(
            hierarchy=hierarchy,
            loadings=TraitLoadings((np.array((0.95, 0.90, 0.85, 0.80, 0.75)),)),
            n_subjects=10_000,
            dich_per_trait=(45, 45, 45, 45, 0),
            graded=graded,
            cross_loadings=cross,
            guessing_mode=GUESSING_UNIFORM,
        )
    raise ValueError(f"preset must be 1..8, got {preset}")


def _draw_thresholds(design: SimulationDesign, m: int, rng: np.random.Generator) -> np.ndarray:
    """Sorted normal draws, redrawn until consecutive gaps clear the minimum."""
    while True:
        t = np.sort(design.threshold_sd * rng.standard_normal(m - 1))
        if m == 2 or np.min(np.diff(t)) >= design.threshold_min_gap:
            return t


def draw_item_bank(design: SimulationDesign, rng: np.random.Generator) -> ItemBank:
    """Draw generating item parameters for a design."""
    q1 = design.hierarchy.trait_counts[0]
    loadsets: list[set[int]] = []
    for trait, count in enumerate(design.dich_per_trait):
        loadsets += [{trait} for _ in range(count)]
    for item, extra in design.cross_loadings:
        loadsets[item].add(extra)

    n_dich = design.n_dichotomous
    if design.guessing_mode == GUESSING_UNIFORM:
        c_all = rng.uniform(0.0, 0.2, size=n_dich)
    elif design.guessing_mode == GUESSING_FIXED:
        c_all = np.full(n_dich, design.guessing_value)
    else:
        c_all = np.zeros(n_dich)

    items: list = []
    for i, loadset in enumerate(loadsets):
        a = np.zeros(q1)
        cols = sorted(loadset)
        a[cols] = rng.uniform(design.a_low, design.a_high, size=len(cols))
        b = design.b_sd * rng.standard_normal()
        items.append(DichotomousItem(a, float(b), float(c_all[i]), tuple(cols), q1))
    for g in design.graded:
        cols = sorted({g.trait, *g.extra_traits})
        a = np.zeros(q1)
        a[cols] = rng.uniform(design.a_low, design.a_high, size=len(cols))
        items.append(GradedItem(a, _draw_thresholds(design, g.n_categories, rng), tuple(cols), q1))
    return ItemBank(tuple(items), q1)


def simulate_responses(
    bank: ItemBank, latent: LatentState, rng: np.random.Generator
) -> ResponseMatrix:
    """Draw one response per (item, subject) cell from the model."""
    theta1 = latent.traits[0]
    n = latent.n_subjects
    values = np.empty((bank.n_items, n))
    for i, item in enumerate(bank.items):
        if item.kind == DICHOTOMOUS:
            p = item.c + (1.0 - item.c) * ndtr(item.a @ theta1 - item.b)
            values[i] = (rng.uniform(size=n) < p).astype(float)
        else:
            s = item.a @ theta1
            cum = ndtr(item.thresholds[:, None] - s[None, :])
            values[i] = (rng.uniform(size=n)[None, :] > cum).sum(axis=0)
    return ResponseMatrix.from_bank(values, bank)


def simulate_dataset(design: SimulationDesign, rng: np.random.Generator) -> SimulatedDataset:
    """Generate a dataset and its truth bundle.

    Draw order is fixed (traits, then item parameters, then responses), so
    a given generator state reproduces the dataset exactly.
    """
    latent = sample_prior_traits(design.hierarchy, design.loadings, design.n_subjects, rng)
    bank = draw_item_bank(design, rng)
    responses = simulate_responses(bank, latent, rng)
    return SimulatedDataset(
        responses=responses,
        truth=TruthBundle(latent=latent, items=bank, loadings=design.loadings),
        design=design,
    )
