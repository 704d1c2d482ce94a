import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("formvar", max_examples=40, deadline=None, derandomize=True)
settings.load_profile("formvar")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
