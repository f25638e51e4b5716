import numpy as np
import pytest

from rsdcm.hemo import build_fir_prior


def random_hurwitz(rng, n, margin=0.1, scale=0.5):
    """Random stable matrix: shift a Gaussian matrix left of the imaginary axis."""
    A = scale * rng.standard_normal((n, n))
    shift = np.max(np.linalg.eigvals(A).real) + margin + rng.uniform(0.0, 0.5)
    return A - shift * np.eye(n)


@pytest.fixture(scope="session")
def fir_prior():
    return build_fir_prior(s=16, T_R=2.0, num_samples=300, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def simulate_ssm(ssm, rng, N, burn=0):
    """Sample Y from a LinearSSM started at zero."""
    d = ssm.d
    w, V = np.linalg.eigh(ssm.Q)
    L = V * np.sqrt(np.clip(w, 0, None))
    x = np.zeros(d)
    Y = np.empty((N, ssm.n_out))
    for k in range(N + burn):
        x = ssm.F @ x + L @ rng.standard_normal(d)
        if k >= burn:
            Y[k - burn] = ssm.C @ x + np.sqrt(ssm.eps) * rng.standard_normal(ssm.n_out)
    return Y


ACCEPTANCE_LINES = {}


def report_criterion(number, passed, detail):
    """Record one acceptance line; all lines are printed in the terminal summary."""
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
