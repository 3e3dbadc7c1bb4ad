import numpy as np
import pytest

from pairbcd.problem import ProblemFamilySpec, project_to_S

# Acceptance results collected by tests/test_acceptance.py and echoed at the
# end of the session, one line per criterion.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


def quadratic(a, b, n=1, **kw):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float).reshape(a.size, n)
    return ProblemFamilySpec("quadratic", a.size, n, a=a, b=b, **kw)


def random_feasible(rng, N, n, scale=1.0):
    return project_to_S(scale * rng.standard_normal(N * n), N)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
