import numpy as np
import pytest

from dsh_lab.dsh_model import FiniteDshModel, Level, ModelPoint, PointRef


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_level_model():
    """Level 1: free points a, b (dim 3). Level 2: glued g = (a, b), free c (dim 6)."""
    return FiniteDshModel((
        Level(3, (ModelPoint("a"), ModelPoint("b"))),
        Level(6, (
            ModelPoint("g", (PointRef(1, "a"), PointRef(1, "b"))),
            ModelPoint("c"),
        )),
    ))


@pytest.fixture
def three_level_model():
    """Adds a level 3 glued point referencing free points two levels down."""
    return FiniteDshModel((
        Level(3, (ModelPoint("a"), ModelPoint("b"))),
        Level(6, (
            ModelPoint("g", (PointRef(1, "a"), PointRef(1, "b"))),
            ModelPoint("c"),
        )),
        Level(9, (
            ModelPoint("h", (PointRef(2, "c"), PointRef(1, "a"))),
            ModelPoint("d"),
        )),
    ))
