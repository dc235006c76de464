"""Numerical toolkit for Dirac-Nambu-Goto p-branes: ADM evolution, charges,
symplectic structure and the Gauss-Bonnet canonical pair on strings."""

from .adm_dynamics import GaugeChoice, PhaseState, Trajectory, evolve, state_from_velocity
from .background import BackgroundMetric, conformal, minkowski
from .errors import (BackgroundError, BraneError, ConfigError, ConstraintDriftError,
                     DegenerateGeometryError, NonFiniteError, SignatureError)
from .grid_core import Grid

__version__ = "0.1.0"

__all__ = [
    "BackgroundError", "BackgroundMetric", "BraneError", "ConfigError", "ConstraintDriftError",
    "DegenerateGeometryError", "GaugeChoice", "Grid", "NonFiniteError", "PhaseState",
    "SignatureError", "Trajectory", "conformal", "evolve", "minkowski", "state_from_velocity",
]
