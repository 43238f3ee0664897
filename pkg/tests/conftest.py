import pytest

from rrqss.model import TABLE1, Geometry


@pytest.fixture
def table1():
    return TABLE1


@pytest.fixture
def geom300():
    return Geometry(300.0)
