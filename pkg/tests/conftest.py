import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import S1_TEXT  # noqa: E402

from causalab import parse_system, sample  # noqa: E402


@pytest.fixture(scope="session")
def s1():
    return parse_system(S1_TEXT)


@pytest.fixture(scope="session")
def s1_data(s1):
    return sample(s1, 200_000, 7)
