import warnings

import numpy as np
import pytest

from cogarch_ii.levy import CogarchParams, VarianceGamma

THETA0 = CogarchParams(0.04, 0.053, 0.038)
THETA1 = CogarchParams(0.04, 0.051, 0.040)
THETA2 = CogarchParams(0.04, 0.055, 0.036)


@pytest.fixture
def vg():
    return VarianceGamma(1.0)


@pytest.fixture
def theta0():
    return THETA0


@pytest.fixture(autouse=True)
def _quiet_clamps():
    from cogarch_ii.errors import ClampWarning

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClampWarning)
        yield


def batch_se(x, batches=20):
    """Standard error of the mean from non-overlapping batch means."""
    x = np.asarray(x, dtype=float)
    m = len(x) // batches
    means = x[: m * batches].reshape(batches, m).mean(axis=1)
    return means.std(ddof=1) / np.sqrt(batches)


_CRITERIA: dict = {}


def record_criterion(number, title, ok, detail):
    line = f"criterion {number} ({title}): {'PASS' if ok else 'FAIL'} - {detail}"
    _CRITERIA[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[number])
