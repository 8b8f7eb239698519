import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scucnr.fixtures import (corridor4_high, corridor4_low,
                             corridor4_stranded, star4, triangle3,
                             triangle3_tight)


@pytest.fixture
def tri3():
    return triangle3()


@pytest.fixture
def tri3_tight():
    return triangle3_tight()


@pytest.fixture
def star():
    return star4()


@pytest.fixture
def c4_high():
    return corridor4_high()


@pytest.fixture
def c4_low():
    return corridor4_low()


@pytest.fixture
def c4_stranded():
    return corridor4_stranded()


def fixture_family():
    """Feasible fixtures used by cross-method equivalence checks."""
    return {
        "triangle3": triangle3(),
        "triangle3_T2": triangle3((80.0, 60.0)),
        "triangle3_tight": triangle3_tight(),
        "star4": star4(),
        "corridor4_low": corridor4_low(),
    }
