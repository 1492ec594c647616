import numpy as np
import pytest
from scipy.integrate import solve_ivp

ACCEPTANCE_LINES: list[str] = []


def rk45_oracle(t_eval, x, beta, gamma, rtol=1e-12, atol=1e-14):
    """Adaptive RK4(5) integration of dI/dt = I(1-I)beta - gamma I."""
    t_eval = np.atleast_1d(np.asarray(t_eval, dtype=float))
    sol = solve_ivp(
        lambda t, i: i * (1 - i) * beta - gamma * i,
        (0.0, float(t_eval.max())),
        [x],
        method="RK45",
        t_eval=t_eval,
        rtol=rtol,
        atol=atol,
    )
    assert sol.success
    return sol.y[0]


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
