"""HIV/AIDS transmission models with PrEP.

Covers simulation and stability analysis of the SICA/SICAE systems,
calibration to Cape Verde surveillance data, and optimal PrEP uptake under a
capacity limit."""

from .control import OcpConfig, OcpSolution, fbsm_solve
from .integrator import TimeGrid, Trajectory, integrate
from .model import ModelParams, r0, r0_sicae
from .presets import preset

__all__ = [
    "ModelParams", "OcpConfig", "OcpSolution", "TimeGrid", "Trajectory",
    "fbsm_solve", "integrate", "preset", "r0", "r0_sicae",
]
__version__ = "0.1.0"
