"""Named parameter sets for the bundled scenarios."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .calibration import CAPE_VERDE_INITIALS
from .errors import InvalidConfigurationError
from .model import ModelParams

MU_CAPE_VERDE = 1 / 69.54

# Rates shared by every scenario (per year).
BASE_RATES = {"mu": MU_CAPE_VERDE, "phi": 1.0, "rho": 0.1, "alpha": 0.33, "omega": 0.09}

SICAE_INITIALS = (10000.0, 200.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Preset:
    name: str
    params: ModelParams
    initials: tuple[float, ...]
    tf: float
    t0_year: int | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "params": self.params.to_dict(),
            "initials": list(self.initials),
            "tf": self.tf,
            "t0_year": self.t0_year,
            "extras": {k: (None if v == math.inf else v) for k, v in self.extras.items()},
        }

    @classmethod
    def from_dict(cls, data) -> Preset:
        extras = {k: (math.inf if v is None else v) for k, v in data.get("extras", {}).items()}
        return cls(
            name=data["name"],
            params=ModelParams.from_dict(data["params"]),
            initials=tuple(float(v) for v in data["initials"]),
            tf=float(data["tf"]),
            t0_year=data.get("t0_year"),
            extras=extras,
        )


def _cape_verde(name, beta, eta_C, eta_A):
    params = ModelParams(Lambda=13045.0, beta=beta, eta_C=eta_C, eta_A=eta_A, d=1.0,
                         **BASE_RATES)
    return Preset(name, params, CAPE_VERDE_INITIALS, tf=27.0, t0_year=1987)


def _constant_population_params(psi, theta):
    n0 = sum(SICAE_INITIALS)
    return ModelParams(Lambda=MU_CAPE_VERDE * n0, beta=0.582, eta_C=0.04, eta_A=1.35, d=0.0,
                       psi=psi, theta=theta, **BASE_RATES)


PRESET_NAMES = ("cape-verde-015", "cape-verde-040", "sicae-baseline", "ocp-baseline")


def preset(name: str) -> Preset:
    if name == "cape-verde-015":
        return _cape_verde(name, 0.752, 0.015, 1.3)
    if name == "cape-verde-040":
        return _cape_verde(name, 0.695, 0.04, 1.35)
    if name == "sicae-baseline":
        return Preset(name, _constant_population_params(0.1, 0.001), SICAE_INITIALS, tf=25.0)
    if name == "ocp-baseline":
        return Preset(name, _constant_population_params(0.0, 0.001), SICAE_INITIALS, tf=25.0,
                      extras={"w1": 1.0, "w2": 1.0, "vartheta": 2000.0})
    raise InvalidConfigurationError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
