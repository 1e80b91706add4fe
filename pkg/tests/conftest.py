import pytest

from coag.geometry import ModelParams
from coag.profile import build_profile


@pytest.fixture(scope="session")
def p0():
    return ModelParams(0.0)


@pytest.fixture(scope="session")
def prof0(p0):
    return build_profile(p0)


@pytest.fixture(scope="session")
def prof_half():
    return build_profile(ModelParams(0.5))
