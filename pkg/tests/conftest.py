import functools

import numpy as np
import pytest

from poisson_dirac.pdctl import load_spec


@functools.lru_cache(maxsize=None)
def builtin(name):
    return load_spec("builtin:" + name)


@pytest.fixture
def spec():
    return builtin


def sample_points(dim, count, seed=0, box=2.0):
    rng = np.random.default_rng(seed)
    return [rng.uniform(-box, box, dim) for _ in range(count)]
