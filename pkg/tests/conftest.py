import math

import numpy as np
import pytest

from blindqkd.presets import Presets


def binomial_ok(successes: int, trials: int, p: float, k: float = 3.0) -> bool:
    """True when ``successes`` lies within ``k`` binomial sigmas of ``trials * p``."""
    sigma = math.sqrt(trials * p * (1 - p))
    return abs(successes - trials * p) <= k * sigma


class NoRandom:
    """Stand-in rng that fails the test if any randomness is consumed."""

    def random(self):
        raise AssertionError("unexpected random draw")


@pytest.fixture(scope="session")
def presets():
    return Presets.builtin()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA = {}  # number -> [text, status]
_NODES = {}  # nodeid -> number


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            num, text = marker.args
            _NODES[item.nodeid] = num
            _CRITERIA.setdefault(num, [text, None])


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion")


def pytest_runtest_logreport(report):
    num = _NODES.get(report.nodeid)
    if num is None or not (report.when == "call" or report.outcome != "passed"):
        return
    entry = _CRITERIA[num]
    if entry[1] != "FAIL":
        entry[1] = "PASS" if report.outcome == "passed" else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        text, status = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num}: {status or 'NOT RUN'}  {text}")
