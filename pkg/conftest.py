import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from planning.strips_task import load_task
from utils.settings import domain_files


def _load(name):
    return load_task(*domain_files(name))


@pytest.fixture(scope="session")
def hanoi_task():
    return _load("hanoi34")


@pytest.fixture(scope="session")
def puzzle_task():
    return _load("eight_puzzle")


@pytest.fixture(scope="session")
def lights_task():
    return _load("lights_out4")


@pytest.fixture(scope="session")
def chain_task():
    return _load("chain")


@pytest.fixture(scope="session")
def fork_task():
    return _load("fork")
