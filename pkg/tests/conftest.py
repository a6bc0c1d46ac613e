import numpy as np
import pytest

from levystep import AtomSpec, LevyModel, LinearCoefficients


@pytest.fixture
def finite_model() -> LevyModel:
    """Finite-activity reference model: small rate 1, tail rate 0.5."""
    return LevyModel(small=AtomSpec(((0.5, 0.6), (-0.4, 0.4))),
                     tail=AtomSpec(((1.5, 0.3), (-2.0, 0.2))))


@pytest.fixture
def finite_coef(finite_model) -> LinearCoefficients:
    return LinearCoefficients.for_model(-0.5, 0.3, 0.2, 0.1, finite_model)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
