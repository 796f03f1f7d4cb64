"""Fixed-step RK4 integration on uniform grids, plus derived series."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import DivergenceError, GridMismatchError, InvalidConfigurationError
from .model import ModelParams, force_of_infection, labels_for


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    tf: float
    step: float

    def __post_init__(self):
        if not self.step > 0:
            raise InvalidConfigurationError(f"step must be > 0, got {self.step}")
        if not self.tf > self.t0:
            raise InvalidConfigurationError(f"tf must exceed t0, got [{self.t0}, {self.tf}]")
        ratio = (self.tf - self.t0) / self.step
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise InvalidConfigurationError(
                f"(tf - t0)/step = {ratio} is not an integer")

    @property
    def n_steps(self) -> int:
        return round((self.tf - self.t0) / self.step)

    @property
    def n_points(self) -> int:
        return self.n_steps + 1

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t0, self.tf, self.n_points)

    def index_of(self, t: float) -> int:
        """Grid index of ``t``, which must lie on the grid."""
        k = (t - self.t0) / self.step
        if abs(k - round(k)) > 1e-6 or not 0 <= round(k) < self.n_points:
            raise InvalidConfigurationError(f"t = {t} is not a grid point")
        return round(k)


@dataclass(frozen=True)
class Trajectory:
    """States on a uniform grid; ``states[k]`` is the state at ``grid.times[k]``.

    Batched runs store an extra trailing axis, ``states.shape == (n_points, dim, m)``.
    """

    grid: TimeGrid
    states: np.ndarray

    def __post_init__(self):
        states = np.array(self.states, dtype=float)
        if states.shape[0] != self.grid.n_points:
            raise InvalidConfigurationError(
                f"{states.shape[0]} states for {self.grid.n_points} grid points")
        if not np.all(np.isfinite(states)):
            raise DivergenceError("trajectory contains non-finite values")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def labels(self) -> tuple[str, ...]:
        return labels_for(self.dim)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def __getitem__(self, name: str) -> np.ndarray:
        return self.states[:, self.labels.index(name)]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self, path, stride: int = 1):
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("t",) + self.labels)
            for t, x in zip(self.times[::stride], self.states[::stride]):
                writer.writerow([repr(float(t))] + [repr(float(v)) for v in x])

    @classmethod
    def from_csv(cls, path) -> Trajectory:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        t = data[:, 0]
        step = (t[-1] - t[0]) / (len(t) - 1)
        return cls(TimeGrid(float(t[0]), float(t[-1]), float(step)), data[:, 1:])


def rk4_step(rhs, t, x, h):
    k1 = rhs(t, x)
    k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = rhs(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(rhs, x0, grid: TimeGrid, *, floor: float | None = None) -> Trajectory:
    """Classical fixed-step fourth-order Runge-Kutta.

    ``rhs(t, x)`` returns dx/dt.  ``x0`` may be a single state or a batch of
    shape ``(dim, m)``.  With ``floor`` given, components in ``[-floor, 0)``
    are clamped to zero and anything more negative is a divergence.
    """
    x = np.array(x0, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise InvalidConfigurationError("initial state must be finite and nonnegative")
    h = grid.step
    times = grid.times
    out = np.empty((grid.n_points,) + x.shape)
    out[0] = x
    for k in range(grid.n_steps):
        x = rk4_step(rhs, times[k], x, h)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"non-finite state at t = {times[k + 1]:.6g}", t=times[k + 1])
        if floor is not None and np.any(x < 0):
            if np.any(x < -floor):
                raise DivergenceError(
                    f"negative compartment {x.min():.3g} at t = {times[k + 1]:.6g}",
                    t=times[k + 1])
            x = np.maximum(x, 0.0)
        out[k + 1] = x
    return Trajectory(grid, out)


def nonnegativity_floor(p: ModelParams) -> float:
    """Clamp tolerance 1e-9 * Lambda/mu used for model trajectories."""
    return 1e-9 * p.carrying_population


def total_population(traj: Trajectory) -> np.ndarray:
    return traj.states.sum(axis=1)


def cumulative_incidence(traj: Trajectory, p: ModelParams, initial_cases: float) -> np.ndarray:
    """initial_cases + running trapezoid integral of the new-infection flux lambda*S."""
    x = np.moveaxis(traj.states, 0, -1)
    flux = force_of_infection(x, p) * x[0]
    return initial_cases + cumulative_trapezoid(flux, traj.times, axis=-1, initial=0.0)


def sample(traj: Trajectory, t: float) -> np.ndarray:
    """State at time ``t`` by linear interpolation between grid points."""
    g = traj.grid
    if not g.t0 <= t <= g.tf:
        raise InvalidConfigurationError(f"t = {t} outside [{g.t0}, {g.tf}]")
    s = (t - g.t0) / g.step
    if abs(s - round(s)) < 1e-9:
        return traj.states[round(s)].copy()
    k = min(int(math.floor(s)), g.n_steps - 1)
    w = s - k
    return (1.0 - w) * traj.states[k] + w * traj.states[k + 1]


def check_same_grid(a: TimeGrid, b: TimeGrid):
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")
