import time

import pytest

from hetacc.cdac import ComposerParams, compose
from hetacc.cdse import ResourceBudget, SearchSpace
from hetacc.platform import builtin_platform
from hetacc.workload import builtin_model

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def vck190():
    return builtin_platform("vck190")


@pytest.fixture(scope="session")
def vck190_cal():
    return builtin_platform("vck190", calibrated=True)


@pytest.fixture(scope="session")
def bert():
    return builtin_model("bert")


@pytest.fixture(scope="session")
def full_space(vck190_cal):
    """Enumeration of the whole calibrated platform, shared across tests."""
    return SearchSpace(ResourceBudget.from_platform(vck190_cal))


@pytest.fixture(scope="session")
def bert_two_acc(vck190_cal, bert):
    """BERT on two accs with default bounds, built from scratch and timed."""
    start = time.perf_counter()
    comp = compose(bert, vck190_cal, ComposerParams(num=2))
    return comp, time.perf_counter() - start
