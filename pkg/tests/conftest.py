import time

import numpy as np
import pytest

from uwloc.channel import power_model
from uwloc.config import NetworkConfig, PhyConfig
from uwloc.cts import RateModel
from uwloc.geometry import Region, distance_pdf

_REPORT: list[str] = []


@pytest.fixture(scope="session")
def net():
    return NetworkConfig()


@pytest.fixture(scope="session")
def phy():
    return PhyConfig()


@pytest.fixture(scope="session")
def x0(net, phy):
    return power_model(net, phy)


@pytest.fixture(scope="session")
def rate_model(net, phy, x0):
    return RateModel(phy, x0, net)


@pytest.fixture(scope="session")
def dist_pdf(net):
    return distance_pdf(Region.of(net))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


class CriterionRecorder:
    """Times one acceptance criterion and records a PASS/FAIL line per check.

    ``report`` prints immediately; assertions are deferred to ``finish`` so
    every sub-check of a criterion is reported even when an earlier one fails.
    """

    def __init__(self, number: int, title: str, budget: float):
        self.number, self.title, self.budget = number, title, budget
        self.start = time.perf_counter()
        self.failures: list[str] = []

    def report(self, passed: bool, detail: str, label: str | None = None) -> None:
        elapsed = time.perf_counter() - self.start
        status = "PASS" if passed and elapsed < self.budget else "FAIL"
        tag = label or str(self.number)
        line = (f"{status} criterion {tag:>3} ({self.title}): {detail} "
                f"[{elapsed:.1f}s / budget {self.budget:.0f}s]")
        _REPORT.append(line)
        print(line)
        if status == "FAIL":
            self.failures.append(line)

    def finish(self) -> None:
        assert not self.failures, "\n".join(self.failures)


def _order(line: str):
    tag = line.split("criterion", 1)[1].split("(", 1)[0].strip()
    digits = "".join(ch for ch in tag if ch.isdigit())
    return int(digits), tag


@pytest.fixture
def criterion():
    return CriterionRecorder


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_REPORT, key=_order):
            terminalreporter.write_line(line)
