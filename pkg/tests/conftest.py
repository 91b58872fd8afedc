from __future__ import annotations

import pytest

from corrugator.core.field import Rect
from corrugator.core.numeric import make_context


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run tests marked slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def dctx():
    return make_context(15, 0)


@pytest.fixture
def mctx():
    return make_context(30, 7)


@pytest.fixture
def unit_square():
    return Rect(0, 1, 0, 1)


@pytest.fixture
def half_square():
    return Rect("-0.5", "0.5", "-0.5", "0.5")
