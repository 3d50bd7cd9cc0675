import os

import pytest

from amie.dataio import load_bif

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "amie", "data")


@pytest.fixture(scope="session")
def insurance_net():
    return load_bif(os.path.join(DATA_DIR, "insurance.bif"))


@pytest.fixture(scope="session")
def water_net():
    return load_bif(os.path.join(DATA_DIR, "water.bif"))


@pytest.fixture(scope="session")
def insurance_path():
    return os.path.join(DATA_DIR, "insurance.bif")


@pytest.fixture(scope="session")
def water_path():
    return os.path.join(DATA_DIR, "water.bif")
