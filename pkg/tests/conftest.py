import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=300,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


class Criteria:
    """Collects acceptance outcomes; one line per criterion in the summary."""

    def __init__(self):
        self.parts = {}

    def record(self, n, ok, detail):
        self.parts.setdefault(n, []).append((bool(ok), detail))
        print(f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")
        return ok

    def lines(self):
        for n in sorted(self.parts):
            ok = all(p for p, _ in self.parts[n])
            yield f"[{'PASS' if ok else 'FAIL'}] criterion {n}: " + "; ".join(d for _, d in self.parts[n])


CRITERIA = Criteria()


@pytest.fixture(scope="session")
def criteria():
    return CRITERIA


def pytest_terminal_summary(terminalreporter):
    lines = list(CRITERIA.lines())
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
