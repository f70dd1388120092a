import math
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from poincare_ads import groups as gr  # noqa: E402


@pytest.fixture(scope="session")
def schottky_gens():
    return gr.make_schottky(2, 6.0, [0.0, math.pi / 4])


@pytest.fixture(scope="session")
def schottky12(schottky_gens):
    return gr.enumerate_words(schottky_gens, 12)


@pytest.fixture(scope="session")
def schottky8(schottky_gens):
    return gr.enumerate_words(schottky_gens, 8)


@pytest.fixture(scope="session")
def cyclic2_20():
    return gr.enumerate_words(gr.make_cyclic(2.0), 20)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
