"""SICA and SICAE HIV/AIDS compartmental models.

States are plain numpy arrays ordered ``(S, I, C, A)`` for SICA and
``(S, I, C, A, E)`` for SICAE.  Every right-hand side also accepts a 2-D
array of shape ``(dim, m)`` and then evaluates ``m`` states at once.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegeneratePopulationError,
    InvalidConfigurationError,
    NoEndemicEquilibriumError,
)

SICA_LABELS = ("S", "I", "C", "A")
SICAE_LABELS = ("S", "I", "C", "A", "E")


def labels_for(dim):
    if dim == 4:
        return SICA_LABELS
    if dim == 5:
        return SICAE_LABELS
    raise InvalidConfigurationError(f"state dimension must be 4 or 5, got {dim}")


@dataclass(frozen=True)
class ModelParams:
    """Epidemiological rates, all per year except the dimensionless modifiers."""

    Lambda: float
    """Recruitment rate (individuals/year)."""
    mu: float
    """Natural death rate."""
    beta: float
    """HIV transmission rate."""
    eta_C: float
    """Relative infectiousness of the treated class C (<= 1)."""
    eta_A: float
    """Relative infectiousness of the AIDS class A (>= 1)."""
    phi: float
    """Treatment rate I -> C."""
    rho: float
    """Progression rate I -> A."""
    alpha: float
    """AIDS treatment rate A -> I."""
    omega: float
    """Treatment default rate C -> I."""
    d: float
    """AIDS-induced death rate."""
    psi: float = 0.0
    """PrEP uptake rate S -> E."""
    theta: float = 0.0
    """PrEP default rate E -> S."""

    def __post_init__(self):
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise InvalidConfigurationError(f"{f.name} must be a number, got {v!r}")
            if not math.isfinite(v) or v < 0:
                raise InvalidConfigurationError(f"{f.name} must be finite and >= 0, got {v}")
        if self.mu <= 0:
            raise InvalidConfigurationError("mu must be > 0")
        if self.eta_C > 1:
            raise InvalidConfigurationError(f"eta_C must be <= 1, got {self.eta_C}")
        if self.eta_A < 1:
            raise InvalidConfigurationError(f"eta_A must be >= 1, got {self.eta_A}")

    def replace(self, **changes) -> ModelParams:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data) -> ModelParams:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InvalidConfigurationError(f"unknown parameter(s): {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    @property
    def carrying_population(self) -> float:
        """Lambda / mu, the upper bound of N in the feasible region."""
        return self.Lambda / self.mu


@dataclass(frozen=True)
class AuxRates:
    xi1: float
    """alpha + mu + d."""
    xi2: float
    """omega + mu."""
    xi3: float
    """rho + phi + mu."""
    xi4: float
    """theta + mu."""
    xi1_d0: float
    """alpha + mu, the d = 0 variant of xi1."""
    beta1: float
    """beta * mu / Lambda, the mass-action transmission coefficient."""
    calN: float
    calD: float


def aux_rates(p: ModelParams) -> AuxRates:
    xi1 = p.alpha + p.mu + p.d
    xi2 = p.omega + p.mu
    calN = p.beta * (xi2 * (xi1 + p.rho * p.eta_A) + p.eta_C * p.phi * xi1)
    calD = p.mu * (xi2 * (p.rho + xi1) + p.phi * xi1 + p.rho * p.d) + p.rho * p.omega * p.d
    return AuxRates(
        xi1=xi1,
        xi2=xi2,
        xi3=p.rho + p.phi + p.mu,
        xi4=p.theta + p.mu,
        xi1_d0=p.alpha + p.mu,
        beta1=p.beta * p.mu / p.Lambda if p.Lambda > 0 else math.nan,
        calN=calN,
        calD=calD,
    )


def _require_d0(p, what):
    if p.d != 0:
        raise InvalidConfigurationError(f"{what} requires d = 0, got d = {p.d}")


def _require_theta0(p, what):
    if p.theta != 0:
        raise InvalidConfigurationError(f"{what} requires theta = 0, got theta = {p.theta}")


def force_of_infection(x, p: ModelParams):
    """beta * (I + eta_C C + eta_A A) / N with N the sum of all compartments."""
    x = np.asarray(x, dtype=float)
    n = x.sum(axis=0)
    if np.any(n <= 0):
        raise DegeneratePopulationError("total population N must be > 0")
    return p.beta * (x[1] + p.eta_C * x[2] + p.eta_A * x[3]) / n


def rhs_sica(x, p: ModelParams):
    S, I, C, A = np.asarray(x, dtype=float)
    lam = force_of_infection(x, p)
    return np.array([
        p.Lambda - lam * S - p.mu * S,
        lam * S - (p.rho + p.phi + p.mu) * I + p.alpha * A + p.omega * C,
        p.phi * I - (p.omega + p.mu) * C,
        p.rho * I - (p.alpha + p.mu + p.d) * A,
    ])


def rhs_sica_mass_action(x, p: ModelParams):
    """Limiting system at N = Lambda/mu; only defined for d = 0."""
    _require_d0(p, "the mass-action SICA system")
    S, I, C, A = np.asarray(x, dtype=float)
    beta1 = p.beta * p.mu / p.Lambda
    lam = beta1 * (I + p.eta_C * C + p.eta_A * A)
    return np.array([
        p.Lambda - lam * S - p.mu * S,
        lam * S - (p.rho + p.phi + p.mu) * I + p.alpha * A + p.omega * C,
        p.phi * I - (p.omega + p.mu) * C,
        p.rho * I - (p.alpha + p.mu) * A,
    ])


def rhs_sicae(x, p: ModelParams):
    S, I, C, A, E = np.asarray(x, dtype=float)
    lam = force_of_infection(x, p)
    return np.array([
        p.Lambda - lam * S - p.mu * S - p.psi * S + p.theta * E,
        lam * S - (p.rho + p.phi + p.mu) * I + p.alpha * A + p.omega * C,
        p.phi * I - (p.omega + p.mu) * C,
        p.rho * I - (p.alpha + p.mu + p.d) * A,
        p.psi * S - (p.mu + p.theta) * E,
    ])


def rhs_sicae_mass_action(x, p: ModelParams):
    """Limiting SICAE system with strict PrEP adherence (theta = 0, d = 0)."""
    _require_d0(p, "the mass-action SICAE system")
    _require_theta0(p, "the mass-action SICAE system")
    S, I, C, A, E = np.asarray(x, dtype=float)
    beta1 = p.beta * p.mu / p.Lambda
    lam = beta1 * (I + p.eta_C * C + p.eta_A * A)
    return np.array([
        p.Lambda - lam * S - (p.mu + p.psi) * S,
        lam * S - (p.rho + p.phi + p.mu) * I + p.alpha * A + p.omega * C,
        p.phi * I - (p.omega + p.mu) * C,
        p.rho * I - (p.alpha + p.mu) * A,
        p.psi * S - p.mu * E,
    ])


def r0(p: ModelParams) -> float:
    """Basic reproduction number N/D of the SICA model."""
    a = aux_rates(p)
    return a.calN / a.calD


def r0_sicae(p: ModelParams) -> float:
    """Spectral radius of the SICAE next-generation matrix.

    Standard incidence weighs new infections by S0/N0 = (theta + mu) /
    (theta + psi + mu) at the disease-free state, so this is ``r0(p)``
    scaled by that fraction; both coincide when psi = 0.
    """
    return r0(p) * (p.theta + p.mu) / (p.theta + p.psi + p.mu)


def r0_reduced(p: ModelParams) -> float:
    """Lambda * N1 / ((mu + psi) * D) for the mass-action SICAE system."""
    _require_d0(p, "r0_reduced")
    _require_theta0(p, "r0_reduced")
    a = aux_rates(p)
    calN1 = a.beta1 * (a.xi2 * (a.xi1_d0 + p.rho * p.eta_A) + p.eta_C * p.phi * a.xi1_d0)
    return p.Lambda * calN1 / ((p.mu + p.psi) * a.calD)


@dataclass(frozen=True)
class Equilibrium:
    state: np.ndarray
    kind: str  # "disease-free" or "endemic"
    r0_at_params: float

    def __post_init__(self):
        state = np.array(self.state, dtype=float)
        state.setflags(write=False)
        object.__setattr__(self, "state", state)


def equilibrium_residual(eq: Equilibrium, rhs, p: ModelParams) -> float:
    """Max-norm of ``rhs(eq.state, p)``."""
    return float(np.max(np.abs(rhs(eq.state, p))))


def dfe_sica(p: ModelParams) -> Equilibrium:
    return Equilibrium(np.array([p.Lambda / p.mu, 0.0, 0.0, 0.0]), "disease-free", r0(p))


def dfe_sicae(p: ModelParams) -> Equilibrium:
    denom = p.mu * (p.theta + p.psi + p.mu)
    S0 = (p.theta + p.mu) * p.Lambda / denom
    E0 = p.psi * p.Lambda / denom
    return Equilibrium(np.array([S0, 0.0, 0.0, 0.0, E0]), "disease-free", r0_sicae(p))


def endemic_sica(p: ModelParams) -> Equilibrium:
    R0 = r0(p)
    if R0 <= 1:
        raise NoEndemicEquilibriumError(f"R0 = {R0:.6g} <= 1, no endemic equilibrium")
    a = aux_rates(p)
    L, N, D = p.Lambda, a.calN, a.calD
    k = p.rho * p.d * a.xi2
    scale = L * (D - N) / (D * (k - N))
    state = np.array([
        L * (k - D) / (p.mu * (k - N)),
        a.xi1 * a.xi2 * scale,
        p.phi * a.xi1 * scale,
        p.rho * a.xi2 * scale,
    ])
    return Equilibrium(state, "endemic", R0)


def endemic_sicae(p: ModelParams) -> Equilibrium:
    R0 = r0_sicae(p)
    if R0 <= 1:
        raise NoEndemicEquilibriumError(f"SICAE R0 = {R0:.6g} <= 1, no endemic equilibrium")
    a = aux_rates(p)
    L, N, D = p.Lambda, a.calN, a.calD
    xi1, xi2, xi4 = a.xi1, a.xi2, a.xi4
    k = p.rho * p.d * xi2
    G = xi1 * (p.phi + xi2) + p.rho * xi2
    F = xi4 * N - (xi4 + p.psi) * k
    S = L * xi4 * G / F
    I = L * xi1 * xi2 * (xi4 * N - (xi4 + p.psi) * D) / (D * F)
    state = np.array([S, I, p.phi * I / xi2, p.rho * I / xi1, p.psi * S / xi4])
    return Equilibrium(state, "endemic", R0)


def endemic_reduced(p: ModelParams) -> Equilibrium:
    """Endemic equilibrium of the mass-action SICAE system (d = 0, theta = 0)."""
    R0 = r0_reduced(p)
    if R0 <= 1:
        raise NoEndemicEquilibriumError(f"reduced R0 = {R0:.6g} <= 1, no endemic equilibrium")
    a = aux_rates(p)
    xi1, xi2 = a.xi1_d0, a.xi2
    H = xi1 * (xi2 + p.eta_C * p.phi) + p.eta_A * p.rho * xi2
    S = a.calD / (a.beta1 * H)
    I = xi1 * xi2 * (p.Lambda - (p.mu + p.psi) * S) / a.calD
    state = np.array([S, I, p.phi * I / xi2, p.rho * I / xi1, p.psi * S / p.mu])
    return Equilibrium(state, "endemic", R0)
