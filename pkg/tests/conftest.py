import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("lab", max_examples=60, deadline=None)
settings.load_profile("lab")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(key=20261014))


_CRITERIA = []


@pytest.fixture
def criterion(capsys):
    """Record and print one acceptance line: ``criterion(num, title, ok, detail)``."""
    def record(num, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d} {title}: {detail}"
        _CRITERIA.append((num, line))
        with capsys.disabled():
            print("\n" + line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
