import random

import pytest

from privbill.group import derive_params
from privbill.signing import MeterKeypair


@pytest.fixture(scope="session")
def test_params():
    return derive_params("mod23")


@pytest.fixture(scope="session")
def prod_params():
    return derive_params("sg256")


@pytest.fixture(scope="session")
def meter_keys():
    return MeterKeypair.generate("meter-0001")


@pytest.fixture
def rng():
    return random.Random(0xBEEF)
