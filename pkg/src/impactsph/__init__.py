"""Coupled particle-element hydrocode for plate perforation studies.

A central disc of the target plate is modeled with smoothed particles
(large deformation, adiabatic shear) and the surrounding annulus with
explicit hexahedral finite elements, tied at the interface.  The
projectile is an elastic-plastic FE body contacting the particles
through a penalty surface.
"""

from .backend import COMPILED_AVAILABLE, active_backend
from .driver import (
    BallisticResult,
    History,
    Simulation,
    ballistic_limit,
    find_ballistic_limit,
    residual_velocity,
    run_simulation,
    run_sweep,
)
from .scenario import Scenario, load_scenario, parse_scenario

__version__ = "1.0.0"

__all__ = [
    "BallisticResult",
    "COMPILED_AVAILABLE",
    "History",
    "Scenario",
    "Simulation",
    "active_backend",
    "ballistic_limit",
    "find_ballistic_limit",
    "load_scenario",
    "parse_scenario",
    "residual_velocity",
    "run_simulation",
    "run_sweep",
]
