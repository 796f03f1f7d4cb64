"""Calibration of the SICA model to the Cape Verde HIV/AIDS series (1987-2014)."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .errors import CalibrationError, DatasetError, InvalidConfigurationError
from .integrator import TimeGrid, cumulative_incidence, integrate, nonnegativity_floor
from .model import ModelParams, rhs_sica

CAPE_VERDE_INITIALS = (323911.0, 61.0, 0.0, 0.0)
REFERENCE_POPULATION_2014 = 513906
FREE_PARAMETERS = ("Lambda", "beta")
HEADER = ["year", "cases", "population"]


@dataclass(frozen=True)
class CalibrationRecord:
    year: int
    cases: int
    population: int


@dataclass(frozen=True)
class CalibrationDataset:
    records: tuple[CalibrationRecord, ...]

    def __post_init__(self):
        recs = tuple(self.records)
        object.__setattr__(self, "records", recs)
        if not recs:
            raise DatasetError("dataset is empty")
        for prev, cur in zip(recs, recs[1:]):
            if cur.year <= prev.year:
                raise DatasetError(f"years not strictly increasing at {cur.year}")
            if cur.cases < prev.cases:
                raise DatasetError(f"cumulative cases decrease at {cur.year}")
        for r in recs:
            if r.cases <= 0 or r.population <= 0:
                raise DatasetError(f"nonpositive count in year {r.year}")

    def __len__(self):
        return len(self.records)

    def record(self, year: int) -> CalibrationRecord:
        for r in self.records:
            if r.year == year:
                return r
        raise KeyError(year)

    @property
    def years(self) -> np.ndarray:
        return np.array([r.year for r in self.records])

    @property
    def cases(self) -> np.ndarray:
        return np.array([r.cases for r in self.records], dtype=float)

    @property
    def population(self) -> np.ndarray:
        return np.array([r.population for r in self.records], dtype=float)

    def to_csv(self, path):
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HEADER)
            for r in self.records:
                w.writerow([r.year, r.cases, r.population])


def bundled_dataset_path():
    return resources.files("prepctl") / "data" / "cape_verde_1987_2014.csv"


def load_dataset(path=None) -> CalibrationDataset:
    """Read a ``year,cases,population`` CSV; defaults to the bundled Cape Verde series."""
    path = bundled_dataset_path() if path is None else Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != HEADER:
            raise DatasetError(f"expected header {','.join(HEADER)}, got {header}")
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                year, cases, population = (int(v) for v in row)
            except ValueError:
                raise DatasetError(f"row {lineno}: expected three integers, got {row}") from None
            records.append(CalibrationRecord(year, cases, population))
    return CalibrationDataset(tuple(records))


def error_percent(model_series, data_series, reference: float = REFERENCE_POPULATION_2014,
                  normalize: bool = True) -> float:
    """100 * ||model - data||_2 / reference, divided by sqrt(n) when ``normalize``.

    The normalized form is the root-mean-square yearly error as a percentage
    of ``reference`` (the 2014 population by default).
    """
    m = np.asarray(model_series, dtype=float)
    d = np.asarray(data_series, dtype=float)
    if m.shape != d.shape:
        raise InvalidConfigurationError(f"series lengths differ: {m.shape} vs {d.shape}")
    norm = float(np.linalg.norm(m - d))
    if normalize:
        norm /= math.sqrt(m.size)
    return 100.0 * norm / reference


@dataclass(frozen=True)
class YearlySeries:
    years: np.ndarray
    population: np.ndarray
    cases: np.ndarray


def simulate_yearly(p: ModelParams, initials=CAPE_VERDE_INITIALS, years=None,
                    step: float = 1e-2, initial_cases: float | None = None) -> YearlySeries:
    """Integrate SICA from ``years[0]`` and sample total population and
    cumulative cases at each listed year.

    Cumulative cases start from ``initial_cases`` (default: the initial I).
    """
    years = np.arange(1987, 2015) if years is None else np.asarray(years)
    initials = np.asarray(initials, dtype=float)
    if initial_cases is None:
        initial_cases = float(initials[1])
    span = float(years[-1] - years[0])
    grid = TimeGrid(0.0, span, step)
    traj = integrate(lambda t, x: rhs_sica(x, p), initials, grid, floor=nonnegativity_floor(p))
    idx = [grid.index_of(float(y - years[0])) for y in years]
    population = traj.states.sum(axis=1)[idx]
    cases = cumulative_incidence(traj, p, initial_cases)[idx]
    return YearlySeries(years, population, cases)


def synthetic_dataset(p: ModelParams, initials=CAPE_VERDE_INITIALS, years=None,
                      step: float = 1e-2) -> CalibrationDataset:
    """Model output rounded to whole individuals, packaged as a dataset."""
    s = simulate_yearly(p, initials, years, step)
    return CalibrationDataset(tuple(
        CalibrationRecord(int(y), int(round(c)), int(round(n)))
        for y, c, n in zip(s.years, s.cases, s.population)))


@dataclass(frozen=True)
class FitResult:
    fitted_params: ModelParams
    objective: float
    free_names: tuple[str, ...]
    iterations: int
    converged: bool
    stage_objectives: dict = field(default_factory=dict)

    def fitted_values(self) -> dict[str, float]:
        return {name: getattr(self.fitted_params, name) for name in self.free_names}

    def to_dict(self) -> dict:
        return {
            "fitted": self.fitted_values(),
            "objective": self.objective,
            "stage_objectives": dict(self.stage_objectives),
            "iterations": self.iterations,
            "converged": self.converged,
            "params": self.fitted_params.to_dict(),
        }

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def fit(dataset: CalibrationDataset, free, bounds, start: ModelParams,
        initials=CAPE_VERDE_INITIALS, step: float = 1e-2, max_iter: int = 500,
        xrtol: float = 1e-6, reference: float = REFERENCE_POPULATION_2014) -> FitResult:
    """Nelder-Mead fit of Lambda (to population) and/or beta (to cumulative cases).

    With both free, Lambda is fitted first and frozen before beta is fitted.
    """
    free = tuple(free)
    unknown = set(free) - set(FREE_PARAMETERS)
    if unknown or not free:
        raise InvalidConfigurationError(f"free parameters must be a nonempty subset of {FREE_PARAMETERS}")
    years = dataset.years
    params = start
    stage_objectives = {}
    iterations = 0
    converged = True

    for name in FREE_PARAMETERS:
        if name not in free:
            continue
        lo, hi = bounds[name]
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise InvalidConfigurationError(f"bounds for {name} must be finite with lo < hi")
        target = dataset.population if name == "Lambda" else dataset.cases
        series = "population" if name == "Lambda" else "cases"

        def objective(v, name=name, target=target, series=series, base=params):
            q = base.replace(**{name: float(v[0])})
            s = simulate_yearly(q, initials, years, step)
            val = error_percent(getattr(s, series), target, reference)
            if not math.isfinite(val):
                raise CalibrationError(f"non-finite objective at {name} = {v[0]}")
            return val

        x0 = min(max(getattr(params, name), lo), hi)
        res = minimize(objective, [x0], method="Nelder-Mead", bounds=[(lo, hi)],
                       options={"xatol": xrtol * abs(x0), "fatol": math.inf, "maxiter": max_iter})
        params = params.replace(**{name: float(res.x[0])})
        stage_objectives[name] = float(res.fun)
        iterations += int(res.nit)
        converged = converged and bool(res.success)

    last = "beta" if "beta" in free else "Lambda"
    return FitResult(params, stage_objectives[last], free, iterations, converged, stage_objectives)
