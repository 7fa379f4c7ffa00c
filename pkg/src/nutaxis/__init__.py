"""Finite-volume simulation and bound verification for a doubly degenerate
nutrient-taxis system with logistic source on rectangles."""

from .errors import (BadScenario, DegenerateSample, NegativeField, NonFinite, NonFiniteField,
                     NonpositiveField, NutaxisError, PositivityViolation, RangeError, StepCollapse)
from .grid import Field, Grid2D, face_gradients, integrate, lp_norm, weighted_gradient_functional
from .model import ModelParams, State, flux_u, rhs_u, rhs_v
from .monitors import BoundReport, MonitorConfig, MonitorRecord, check_bounds, record, window_integral
from .stepper import RunConfig, RunResult, StepControl, run, stable_dt, step

__version__ = "0.1.0"
