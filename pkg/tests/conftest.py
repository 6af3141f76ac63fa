import numpy as np
import pytest

from noisy_submod import CoverageObjective


def random_coverage(rng, n, n_tags, max_tags=4):
    """Coverage instance with 1..max_tags random tags per item."""
    tags = [rng.choice(n_tags, size=int(rng.integers(1, max_tags + 1)), replace=False).tolist()
            for _ in range(n)]
    return CoverageObjective(tags, n_tags)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def acceptance(number, passed, detail):
    """Record and print one acceptance verdict line."""
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
