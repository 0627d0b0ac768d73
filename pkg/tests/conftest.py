import warnings

import pytest

from dcf_analyzer import NetworkConfig


@pytest.fixture
def cfg():
    return NetworkConfig()


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield
