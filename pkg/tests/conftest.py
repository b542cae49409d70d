import numpy as np
import pytest

from sotdd.dataset import Dataset


def make_dataset(rng, n, d, classes, shift=0.0, scale=1.0, name=""):
    labels = rng.integers(0, classes, size=n)
    centers = np.linspace(-1.0, 1.0, classes)
    X = rng.normal(size=(n, d)) * scale + centers[labels, None] + shift
    return Dataset(X, labels, name)


@pytest.fixture
def rng():
    return np.random.default_rng(20241018)


# acceptance criteria append (number, title, passed, detail); printed at the end
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number}. {title}: {detail}")
