"""Shared fixtures: distribution specs and seeded streams."""

from __future__ import annotations

from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest

from refined_clt import tail_model
from refined_clt.models import DistributionConfig, DistributionSpec, Family, TailParams

FIXTURES_DIR = Path(__file__).parent / "fixtures"


def pareto_spec(xi: float, omega: float = 1.0, kappa: float = 0.0) -> DistributionSpec:
    """Centered Pareto with x0 = omega; delta at the family ceiling."""
    delta = 10.0 if kappa else xi
    return DistributionSpec(
        family=Family.CENTERED_PARETO,
        params=TailParams(xi=xi, omega=omega, delta=delta, x0=omega, kappa=kappa),
    )


@pytest.fixture
def pareto_04() -> DistributionSpec:
    return pareto_spec(0.4)


@pytest.fixture
def pareto_045() -> DistributionSpec:
    return pareto_spec(0.45)


@pytest.fixture
def pareto_07() -> DistributionSpec:
    return pareto_spec(0.7)


@pytest.fixture
def student_t3() -> DistributionSpec:
    return tail_model.build_spec(DistributionConfig(family=Family.STUDENT_T, extra={"nu": 3.0}))


@pytest.fixture
def student_t25() -> DistributionSpec:
    return tail_model.build_spec(DistributionConfig(family=Family.STUDENT_T, extra={"nu": 2.5}))


@pytest.fixture
def frechet_25() -> DistributionSpec:
    return tail_model.build_spec(
        DistributionConfig(family=Family.FRECHET_CENTERED, extra={"alpha": 2.5})
    )


@pytest.fixture
def stream() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def make_pareto() -> Callable[..., DistributionSpec]:
    return pareto_spec
