from functools import partial

import pytest

from rankcf.dgp import DgpConfig
from rankcf.dgp import generate


@pytest.fixture()
def sample_factory():
    def factory(**kwargs):
        kwargs.setdefault("n", 300)
        kwargs.setdefault("seed", 3)
        return generate(DgpConfig(**kwargs))

    return factory


@pytest.fixture()
def sample(sample_factory):
    return sample_factory()


@pytest.fixture()
def config_factory():
    return partial(DgpConfig, n=300, seed=3)
