from __future__ import annotations

import numpy as np
import pytest

from anisomult.bump import build_bump
from anisomult.weights import custom_profile


@pytest.fixture(scope="session")
def bump():
    """The certified default bump (about 5 s to build, shared by every test)."""
    return build_bump()


@pytest.fixture(scope="session")
def adversarial_bump():
    """Scale far below the certified one; the lattice overlap sum is about 1.3."""
    return build_bump(h=2.0, strict=False)


def radial_increasing(n: int):
    """``psi_j(xi) = 1 + |xi|`` on every axis, so ``S(xi)`` is the ball of radius ``|xi|``."""
    comp = lambda x: 1.0 + np.sqrt(np.sum(x * x, axis=-1))  # noqa: E731
    return custom_profile([comp] * n)


def constant_profile(n: int):
    return custom_profile([lambda x: np.ones(len(x))] * n)


# acceptance lines, filled by test_acceptance.py and printed after the run
ACCEPTANCE: dict = {}


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number} {title}: {'PASS' if passed else 'FAIL'} ({detail})"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
