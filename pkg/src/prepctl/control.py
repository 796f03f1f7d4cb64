"""Optimal PrEP uptake under a capacity constraint S(t) u(t) <= vartheta.

Minimizes J(u) = int_0^tf (w1 I + w2 u^2) dt over controls 0 <= u <= 1 for
the constant-population SICAE system with u replacing psi.  The solver is a
relaxed forward-backward sweep that alternates RK4 passes for the state
(forward) and the adjoint (backward from lambda(tf) = 0) with a pointwise
projected control update.

Conventions: minimization with the cost multiplier fixed to 1.  The
Hamiltonian is

    H = w1 I + w2 u^2 + lambda . f(x, u) + nu (S u - vartheta)

so stationarity in u gives u = (lambda1 - lambda5 - nu) S / (2 w2) and the
capacity multiplier nu is nonnegative, positive only where the constraint
is active.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid

from .errors import DivergenceError, InvalidConfigurationError, MultiplierSignError
from .integrator import TimeGrid, Trajectory, check_same_grid, integrate
from .model import ModelParams

NU_SIGN_TOL = 1e-9


@dataclass(frozen=True)
class OcpConfig:
    params: ModelParams
    w1: float = 1.0
    w2: float = 1.0
    vartheta: float = math.inf
    grid: TimeGrid = field(default_factory=lambda: TimeGrid(0.0, 25.0, 1e-2))
    initials: tuple[float, ...] = (10000.0, 200.0, 0.0, 0.0, 0.0)
    relaxation: float = 0.5
    tol: float = 1e-6
    max_sweeps: int = 200

    def __post_init__(self):
        p = self.params
        if p.d != 0:
            raise InvalidConfigurationError("the controlled system requires d = 0")
        if not (self.w1 > 0 and self.w2 > 0):
            raise InvalidConfigurationError("weights w1, w2 must be > 0")
        if not self.vartheta > 0:
            raise InvalidConfigurationError("vartheta must be > 0 (use inf for no constraint)")
        if not 0 < self.relaxation <= 1:
            raise InvalidConfigurationError("relaxation must lie in (0, 1]")
        if self.tol <= 0 or self.max_sweeps < 1:
            raise InvalidConfigurationError("tol must be > 0 and max_sweeps >= 1")
        x0 = tuple(float(v) for v in self.initials)
        if len(x0) != 5 or min(x0) < 0:
            raise InvalidConfigurationError("initials must be five nonnegative values")
        object.__setattr__(self, "initials", x0)
        n0 = sum(x0)
        if abs(p.Lambda - p.mu * n0) > 1e-9 * p.Lambda:
            raise InvalidConfigurationError(
                f"constant population needs Lambda = mu * N(0) = {p.mu * n0}, got {p.Lambda}")

    @property
    def population(self) -> float:
        return self.params.Lambda / self.params.mu

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.vartheta)

    def replace(self, **changes) -> OcpConfig:
        return dataclasses.replace(self, **changes)


def rhs_controlled(x, u, p: ModelParams):
    """SICAE right-hand side with PrEP uptake ``u`` and fixed N = Lambda/mu."""
    if p.d != 0:
        raise InvalidConfigurationError("the controlled system requires d = 0")
    S, I, C, A, E = x
    n = p.Lambda / p.mu
    lam = p.beta * (I + p.eta_C * C + p.eta_A * A) / n
    return np.array([
        p.Lambda - lam * S - p.mu * S - S * u + p.theta * E,
        lam * S - (p.rho + p.phi + p.mu) * I + p.alpha * A + p.omega * C,
        p.phi * I - (p.omega + p.mu) * C,
        p.rho * I - (p.alpha + p.mu) * A,
        S * u - (p.mu + p.theta) * E,
    ])


def adjoint_rhs(l, x, u, nu, cfg: OcpConfig):
    """Costate derivatives; equal to -dH/dx for the Hamiltonian below."""
    p = cfg.params
    l1, l2, l3, l4, l5 = l
    S, I, C, A, E = x
    b = p.beta / cfg.population
    Y = I + p.eta_C * C + p.eta_A * A
    return np.array([
        l1 * (b * Y + p.mu + u) - l2 * b * Y - l5 * u - nu * u,
        -cfg.w1 + l1 * b * S - l2 * (b * S - p.rho - p.phi - p.mu) - l3 * p.phi - l4 * p.rho,
        l1 * b * p.eta_C * S - l2 * (b * p.eta_C * S + p.omega) - l3 * (-p.omega - p.mu),
        l1 * b * p.eta_A * S - l2 * (b * p.eta_A * S + p.alpha) - l4 * (-p.alpha - p.mu),
        -l1 * p.theta - l5 * (-p.theta - p.mu),
    ])


def hamiltonian(x, u, l, nu, cfg: OcpConfig):
    x = np.asarray(x, dtype=float)
    l = np.asarray(l, dtype=float)
    f = rhs_controlled(x, u, cfg.params)
    running = cfg.w1 * x[1] + cfg.w2 * np.square(u)
    slack = x[0] * u - cfg.vartheta
    constraint = np.where(np.asarray(nu) == 0, 0.0, nu * np.where(np.isfinite(slack), slack, 0.0))
    return running + np.sum(l * f, axis=0) + constraint


def control_update(x, l, cfg: OcpConfig):
    """Minimize H over admissible u at each point; returns ``(u, nu)``.

    Works pointwise or on arrays of shape ``(5, m)``.
    """
    x = np.asarray(x, dtype=float)
    l = np.asarray(l, dtype=float)
    S = x[0]
    if np.any(S <= 0):
        raise InvalidConfigurationError("control update needs S > 0")
    gap = l[0] - l[4]
    u = np.clip(gap * S / (2.0 * cfg.w2), 0.0, 1.0)
    nu = np.zeros_like(u)
    if cfg.bounded:
        active = S * u > cfg.vartheta
        u = np.where(active, np.minimum(cfg.vartheta / S, 1.0), u)
        nu = np.where(active, gap - 2.0 * cfg.w2 * u / S, 0.0)
        if np.any(nu < -NU_SIGN_TOL):
            raise MultiplierSignError(f"capacity multiplier {nu.min():.3g} < 0")
    if u.ndim == 0:
        return float(u), float(nu)
    return u, nu


@dataclass(frozen=True)
class ControlSignal:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise InvalidConfigurationError("control must have one value per grid point")
        if np.any(v < 0) or np.any(v > 1):
            raise InvalidConfigurationError("control values must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid: TimeGrid, value: float) -> ControlSignal:
        return cls(grid, np.full(grid.n_points, float(value)))

    def mean(self) -> float:
        g = self.grid
        return float(trapezoid(self.values, g.times) / (g.tf - g.t0))


@dataclass(frozen=True)
class AdjointTrajectory:
    grid: TimeGrid
    lambdas: np.ndarray
    """Shape ``(n_points, 5)``."""
    nu: np.ndarray

    def __post_init__(self):
        for name in ("lambdas", "nu"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class OcpSolution:
    control: ControlSignal
    state: Trajectory
    adjoint: AdjointTrajectory
    cost: float
    prep_person_time: float
    sweeps: int
    converged: bool
    constraint_max: float
    config: OcpConfig = field(repr=False)

    def diagnostics(self) -> dict:
        return {
            "sweeps": self.sweeps,
            "converged": self.converged,
            "cost": self.cost,
            "prep_person_time": self.prep_person_time,
            "constraint_max": self.constraint_max if math.isfinite(self.constraint_max) else None,
            "control_mean": self.control.mean(),
            "control_max": float(self.control.values.max()),
            "control_t0": float(self.control.values[0]),
            "final_state": dict(zip(self.state.labels, map(float, self.state.final))),
            "saturation_intervals": saturation_intervals(self.control),
        }

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.diagnostics(), indent=2))

    def to_csv(self, path, stride: int = 1):
        header = ["t", "u", "S", "I", "C", "A", "E", "l1", "l2", "l3", "l4", "l5", "nu"]
        cols = np.column_stack([
            self.state.times, self.control.values, self.state.states,
            self.adjoint.lambdas, self.adjoint.nu])
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in cols[::stride]:
                w.writerow([repr(float(v)) for v in row])


def cost_J(traj: Trajectory, control: ControlSignal, cfg: OcpConfig) -> float:
    """Trapezoid rule for int (w1 I + w2 u^2) dt."""
    check_same_grid(traj.grid, control.grid)
    integrand = cfg.w1 * traj["I"] + cfg.w2 * control.values ** 2
    return float(trapezoid(integrand, traj.times))


def prep_person_time(traj: Trajectory, control: ControlSignal) -> float:
    """int u S dt in individual-years."""
    check_same_grid(traj.grid, control.grid)
    return float(trapezoid(control.values * traj["S"], traj.times))


def simulate_control(cfg: OcpConfig, control: ControlSignal) -> Trajectory:
    """Forward RK4 under a given control, using the sweep's stage convention."""
    return Trajectory(cfg.grid, _forward(cfg, control.values))


def simulate_constant(cfg: OcpConfig, value: float, project: bool = True):
    """Constant uptake ``value``, capped at vartheta/S when ``project`` and the
    capacity is bounded.  Returns ``(trajectory, control)``."""
    if not 0 <= value <= 1:
        raise InvalidConfigurationError("constant control must lie in [0, 1]")
    p = cfg.params
    capped = project and cfg.bounded

    def u_of(S):
        return np.minimum(value, cfg.vartheta / S) if capped else value

    traj = integrate(lambda t, x: rhs_controlled(x, u_of(x[0]), p), cfg.initials, cfg.grid)
    values = np.broadcast_to(u_of(traj["S"]), (cfg.grid.n_points,))
    return traj, ControlSignal(cfg.grid, values)


def saturation_intervals(control: ControlSignal, level: float = 1.0 - 1e-6):
    """Maximal runs of grid points where the control is at its upper bound."""
    on = control.values >= level
    t = control.grid.times
    out = []
    k = 0
    n = on.size
    while k < n:
        if on[k]:
            j = k
            while j + 1 < n and on[j + 1]:
                j += 1
            out.append((float(t[k]), float(t[j])))
            k = j + 1
        else:
            k += 1
    return out


# -- sweeps -------------------------------------------------------------------

def _forward(cfg, u):
    """Control at half steps is the average of the neighbouring grid values."""
    p = cfg.params
    h = cfg.grid.step
    n = cfg.grid.n_steps
    x = np.empty((n + 1, 5))
    x[0] = cfg.initials
    for k in range(n):
        xk = x[k]
        um = 0.5 * (u[k] + u[k + 1])
        k1 = rhs_controlled(xk, u[k], p)
        k2 = rhs_controlled(xk + 0.5 * h * k1, um, p)
        k3 = rhs_controlled(xk + 0.5 * h * k2, um, p)
        k4 = rhs_controlled(xk + h * k3, u[k + 1], p)
        x[k + 1] = xk + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x[k + 1])):
            t = cfg.grid.t0 + (k + 1) * h
            raise DivergenceError(f"state sweep diverged at t = {t:.6g}", t=t)
    return x


def _backward(cfg, x, u, nu):
    h = cfg.grid.step
    n = cfg.grid.n_steps
    lam = np.empty((n + 1, 5))
    lam[n] = 0.0
    for k in range(n, 0, -1):
        lk = lam[k]
        xm = 0.5 * (x[k] + x[k - 1])
        um = 0.5 * (u[k] + u[k - 1])
        nm = 0.5 * (nu[k] + nu[k - 1])
        k1 = adjoint_rhs(lk, x[k], u[k], nu[k], cfg)
        k2 = adjoint_rhs(lk - 0.5 * h * k1, xm, um, nm, cfg)
        k3 = adjoint_rhs(lk - 0.5 * h * k2, xm, um, nm, cfg)
        k4 = adjoint_rhs(lk - h * k3, x[k - 1], u[k - 1], nu[k - 1], cfg)
        lam[k - 1] = lk - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(lam[k - 1])):
            t = cfg.grid.t0 + (k - 1) * h
            raise DivergenceError(f"adjoint sweep diverged at t = {t:.6g}", t=t)
    return lam


def _relative_change(new, old):
    scale = np.sum(np.abs(new))
    diff = np.sum(np.abs(new - old))
    if scale == 0:
        return 0.0 if diff == 0 else math.inf
    return float(diff / scale)


def fbsm_solve(cfg: OcpConfig, u_init=None) -> OcpSolution:
    """Relaxed forward-backward sweep.

    Stops once the relative L1 change of u, x and lambda between sweeps all
    fall below ``cfg.tol``; otherwise returns the last iterate flagged as not
    converged.  The returned control is the projected update computed from
    the final state and adjoint, so it is exactly admissible on that state.
    """
    n = cfg.grid.n_points
    u = np.zeros(n) if u_init is None else np.array(u_init, dtype=float)
    nu = np.zeros(n)
    x = np.zeros((n, 5))
    lam = np.zeros((n, 5))
    converged = False
    sweeps = 0
    for sweeps in range(1, cfg.max_sweeps + 1):
        x_old, lam_old, u_old = x, lam, u
        x = _forward(cfg, u)
        lam = _backward(cfg, x, u, nu)
        u_new, nu = control_update(x.T, lam.T, cfg)
        u = (1.0 - cfg.relaxation) * u_old + cfg.relaxation * u_new
        change = max(_relative_change(u, u_old), _relative_change(x, x_old),
                     _relative_change(lam, lam_old))
        if sweeps > 1 and change < cfg.tol:
            converged = True
            break

    u, nu = control_update(x.T, lam.T, cfg)
    control = ControlSignal(cfg.grid, u)
    state = Trajectory(cfg.grid, x)
    uS = u * x[:, 0]
    constraint_max = float(np.max(uS - cfg.vartheta)) if cfg.bounded else -math.inf
    return OcpSolution(
        control=control,
        state=state,
        adjoint=AdjointTrajectory(cfg.grid, lam, nu),
        cost=cost_J(state, control, cfg),
        prep_person_time=prep_person_time(state, control),
        sweeps=sweeps,
        converged=converged,
        constraint_max=constraint_max,
        config=cfg,
    )
