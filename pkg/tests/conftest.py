import math

import pytest
from hypothesis import settings

from fragasym import kernel as km
from fragasym import mellin as mm

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def hom():
    return km.homogeneous()


@pytest.fixture
def mito():
    return km.mitosis()


@pytest.fixture
def pow1():
    return km.power(1.0)


@pytest.fixture
def lg():
    return mm.log_gaussian(-5.0)


@pytest.fixture
def tsp():
    return mm.two_sided_power(0.0, 3.0)


LOG2 = math.log(2.0)
