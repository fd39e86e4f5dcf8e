import random
from fractions import Fraction

import pytest

from nilwalk.algebra import LieVector
from nilwalk.catalog import get_group


@pytest.fixture(scope="session")
def h3():
    return get_group("heisenberg3")


@pytest.fixture(scope="session")
def ut4():
    return get_group("ut4")


@pytest.fixture(scope="session")
def free23():
    return get_group("free2step3")


def rational_vector(spec, rnd: random.Random, span: int = 9) -> LieVector:
    den = rnd.randint(1, 6)
    coords = tuple(Fraction(rnd.randint(-span, span), den)
                   for _ in range(spec.total_dim))
    return LieVector(spec, coords)
