import numpy as np
import pytest

from hiermirt import (
    DichotomousItem,
    GradedItem,
    HierarchySpec,
    ItemBank,
    TraitLoadings,
)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_hierarchy():
    return HierarchySpec((3, 1), ((0, 0, 0),))


@pytest.fixture
def small_loadings():
    return TraitLoadings((np.array([0.8, 0.6, 0.4]),))


@pytest.fixture
def small_bank():
    q1 = 3
    items = (
        DichotomousItem(np.array([1.0, 0.0, 0.0]), 0.0, 0.0, (0,), q1),
        DichotomousItem(np.array([0.0, 0.9, 0.3]), -0.5, 0.2, (1, 2), q1),
        DichotomousItem(np.array([0.0, 0.0, 1.1]), 0.4, 0.1, (2,), q1),
        GradedItem(np.array([1.2, 0.0, 0.0]), np.array([-1.0, 0.0, 1.5]), (0,), q1),
        GradedItem(np.array([0.0, 0.8, 0.0]), np.array([-0.4, 0.9]), (1,), q1),
    )
    return ItemBank(items, q1)
