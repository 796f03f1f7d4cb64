"""Numerical stability checks around the model equilibria."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model
from .errors import DivergenceError, InvalidConfigurationError
from .integrator import TimeGrid, Trajectory, integrate
from .model import Equilibrium, ModelParams

STABLE_THRESHOLD = -1e-9


def jacobian(rhs, x, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of ``rhs(x)`` with step ``h * max(1, |x_i|)``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    J = np.empty((n, n))
    for i in range(n):
        dx = h * max(1.0, abs(x[i]))
        e = np.zeros(n)
        e[i] = dx
        J[:, i] = (np.asarray(rhs(x + e)) - np.asarray(rhs(x - e))) / (2.0 * dx)
    if not np.all(np.isfinite(J)):
        raise DivergenceError("non-finite Jacobian entry")
    return J


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    max_real_part: float
    stable: bool

    @property
    def status(self) -> str:
        if self.stable:
            return "stable"
        if abs(self.max_real_part) <= -STABLE_THRESHOLD:
            return "marginal"
        return "unstable"

    def to_dict(self) -> dict:
        return {
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "max_real_part": self.max_real_part,
            "stable": self.stable,
            "status": self.status,
        }


def spectrum(J) -> SpectrumReport:
    ev = np.linalg.eigvals(J)
    mrp = float(np.max(ev.real))
    return SpectrumReport(ev, mrp, mrp < STABLE_THRESHOLD)


def local_stability(eq: Equilibrium, rhs, h: float = 1e-6) -> SpectrumReport:
    """Spectrum of the finite-difference Jacobian of ``rhs(x)`` at ``eq``."""
    return spectrum(jacobian(rhs, eq.state, h))


def dfe_spectral_threshold(p: ModelParams, system: str = "sica", lo: float = 1e-6,
                           hi: float = 5.0, tol: float = 1e-10) -> float:
    """Bisect on beta for the sign change of the DFE's leading eigenvalue."""
    if system == "sica":
        rhs, dfe = model.rhs_sica, model.dfe_sica
    elif system == "sicae":
        rhs, dfe = model.rhs_sicae, model.dfe_sicae
    else:
        raise InvalidConfigurationError(f"unknown system {system!r}")

    def leading(beta):
        q = p.replace(beta=beta)
        return local_stability(dfe(q), lambda x: rhs(x, q)).max_real_part

    f_lo, f_hi = leading(lo), leading(hi)
    if not (f_lo < 0 < f_hi):
        raise InvalidConfigurationError(
            f"no sign change of the leading eigenvalue on beta in [{lo}, {hi}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if leading(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# -- Lyapunov functions -------------------------------------------------------

def _lyapunov_weights(p):
    return np.array([1.0, 1.0, p.omega / (p.omega + p.mu), p.alpha / (p.alpha + p.mu)])


def lyapunov_endemic(x, eq_state, p: ModelParams):
    """Volterra-type function centred at an endemic state (d = 0 form).

    ``x`` holds the compartments along axis 0 and may carry extra axes;
    only S, I, C, A enter.
    """
    x = np.asarray(x, dtype=float)[:4]
    xs = np.asarray(eq_state, dtype=float)[:4]
    if np.any(x <= 0):
        raise InvalidConfigurationError("lyapunov_endemic needs strictly positive S, I, C, A")
    xs = xs.reshape((4,) + (1,) * (x.ndim - 1))
    w = _lyapunov_weights(p).reshape(xs.shape)
    return np.sum(w * (x - xs * np.log(x)), axis=0)


def lyapunov_endemic_rate(x, eq_state, p: ModelParams, rhs):
    """dV/dt = sum_i w_i (1 - x_i*/x_i) f_i(x) for the endemic function."""
    x = np.asarray(x, dtype=float)
    xs = np.asarray(eq_state, dtype=float)[:4].reshape((4,) + (1,) * (x.ndim - 1))
    w = _lyapunov_weights(p).reshape(xs.shape)
    f = np.asarray(rhs(x, p))[:4]
    return np.sum(w * (1.0 - xs / x[:4]) * f, axis=0)


def lyapunov_dfe_coefficients(p: ModelParams) -> np.ndarray:
    a = model.aux_rates(p)
    xi1, xi2, xi3 = a.xi1, a.xi2, a.xi3
    return np.array([
        xi1 * xi2 + xi1 * p.phi * p.eta_C + xi2 * p.rho * p.eta_A,
        xi1 * p.omega + xi1 * xi3 * p.eta_C + p.rho * p.eta_A * p.omega - p.eta_C * p.rho * p.alpha,
        p.alpha * xi2 + xi2 * xi3 * p.eta_A + p.phi * p.eta_C * p.alpha - p.phi * p.eta_A * p.omega,
    ])


def lyapunov_dfe(x, p: ModelParams):
    """Linear function of (I, C, A) that decreases whenever R0 < 1."""
    x = np.asarray(x, dtype=float)
    c = lyapunov_dfe_coefficients(p).reshape((3,) + (1,) * (x.ndim - 1))
    return np.sum(c * x[1:4], axis=0)


@dataclass(frozen=True)
class DescentReport:
    v_series: np.ndarray
    max_increase: float
    monotone: bool

    def to_dict(self) -> dict:
        return {
            "v_series": self.v_series.tolist(),
            "max_increase": self.max_increase,
            "monotone": self.monotone,
        }


def descent_report(v_series, tol: float) -> DescentReport:
    """Monotone when no forward difference of the series exceeds ``tol``."""
    v = np.asarray(v_series, dtype=float)
    inc = float(np.max(np.diff(v))) if v.size > 1 else 0.0
    return DescentReport(v, inc, inc <= tol)


# -- convergence --------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceReport:
    converged: bool
    distances: np.ndarray
    final_distance: float
    first_passage_time: float | None


def converged_to(traj: Trajectory, eq: Equilibrium, tol: float = 0.01) -> ConvergenceReport:
    """Relative Euclidean distance ``|x(t) - x*| / |x*|`` along the trajectory."""
    xs = np.asarray(eq.state)
    if traj.states.shape[1] != xs.size:
        raise InvalidConfigurationError(
            f"trajectory dimension {traj.states.shape[1]} does not match equilibrium {xs.size}")
    dist = np.linalg.norm(traj.states - xs, axis=1) / np.linalg.norm(xs)
    below = np.nonzero(dist <= tol)[0]
    t_first = float(traj.times[below[0]]) if below.size else None
    return ConvergenceReport(bool(dist[-1] <= tol), dist, float(dist[-1]), t_first)


def sample_initial_states(p: ModelParams, n: int, rng, dim: int = 4,
                          fill: tuple[float, float] = (0.2, 1.0)) -> np.ndarray:
    """Random strictly positive states with N <= Lambda/mu, shape ``(dim, n)``.

    Total population is drawn uniformly in ``fill`` times Lambda/mu and split
    among compartments by a flat Dirichlet draw.
    """
    total = rng.uniform(*fill, size=n) * p.carrying_population
    shares = rng.dirichlet(np.ones(dim), size=n)
    return (shares * total[:, None]).T


def conjecture_probe(p: ModelParams, n_samples: int = 20, tf: float = 400.0,
                     step: float = 0.05, tol: float = 0.01, seed: int = 0) -> dict:
    """Conjecture probe: does the d > 0 SICA endemic state attract sampled starts?

    Reports statistics only; nothing here is asserted as a theorem.
    """
    eq = model.endemic_sica(p)
    rng = np.random.default_rng(seed)
    x0 = sample_initial_states(p, n_samples, rng)
    traj = integrate(lambda t, x: model.rhs_sica(x, p), x0, TimeGrid(0.0, tf, step))
    xs = eq.state[:, None]
    final = traj.states[-1]
    dist = np.linalg.norm(final - xs, axis=0) / np.linalg.norm(xs)
    return {
        "label": "conjecture probe",
        "d": p.d,
        "r0": eq.r0_at_params,
        "endemic_state": eq.state.tolist(),
        "n_samples": n_samples,
        "tf": tf,
        "tol": tol,
        "n_converged": int(np.sum(dist <= tol)),
        "final_distances": dist.tolist(),
    }
