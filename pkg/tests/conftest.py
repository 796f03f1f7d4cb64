import numpy as np
import pytest

from prepctl.model import ModelParams
from prepctl.presets import BASE_RATES, preset


def ngm_r0(p: ModelParams, s_fraction: float = 1.0) -> float:
    """Spectral radius of F V^-1 from hand-built transmission/transition blocks."""
    F = p.beta * s_fraction * np.array([[1.0, p.eta_C, p.eta_A], [0, 0, 0], [0, 0, 0]])
    V = np.array([
        [p.rho + p.phi + p.mu, -p.omega, -p.alpha],
        [-p.phi, p.omega + p.mu, 0.0],
        [-p.rho, 0.0, p.alpha + p.mu + p.d],
    ])
    return float(max(abs(np.linalg.eigvals(F @ np.linalg.inv(V)))))


def random_params(rng, *, d=None, psi=0.0, theta=0.0) -> ModelParams:
    """Random valid rates around the Cape Verde magnitudes."""
    return ModelParams(
        Lambda=float(rng.uniform(1e2, 2e4)),
        mu=float(rng.uniform(0.005, 0.05)),
        beta=float(rng.uniform(0.2, 2.0)),
        eta_C=float(rng.uniform(0.0, 1.0)),
        eta_A=float(rng.uniform(1.0, 2.0)),
        phi=float(rng.uniform(0.05, 2.0)),
        rho=float(rng.uniform(0.01, 0.5)),
        alpha=float(rng.uniform(0.05, 1.0)),
        omega=float(rng.uniform(0.01, 0.5)),
        d=float(rng.uniform(0.0, 1.5)) if d is None else d,
        psi=psi,
        theta=theta,
    )


@pytest.fixture
def cv015():
    return preset("cape-verde-015").params


@pytest.fixture
def cv040():
    return preset("cape-verde-040").params


@pytest.fixture
def table2():
    return dict(BASE_RATES)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
