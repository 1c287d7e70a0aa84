import math

import numpy as np
import pytest

from tbalab import AsymptoticsSpec, ModelSpec, make_grid, solve_tba

# filled by test_acceptance, printed at the end of the session
ACCEPTANCE_LINES = {}


def yang_lee_spec(C=0.5):
    return ModelSpec(1.0, np.array([[1.0]]), np.array([[C]]), AsymptoticsSpec.mass_cosh(1.0, math.pi / 3, [1.0]))


@pytest.fixture(scope="session")
def yl_grid():
    return make_grid(25.0, 4097)


@pytest.fixture(scope="session")
def yang_lee(yl_grid):
    """Converged Yang-Lee solution at s = 1, r = 1 in gauge G/2."""
    spec = yang_lee_spec()
    sol, rep = solve_tba(spec, yl_grid)
    return spec, yl_grid, sol, rep


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
