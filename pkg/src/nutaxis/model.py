"""Discrete right-hand sides of the regularised nutrient-taxis system.

    u_t = div(u v grad u) - div(u^2 v grad v) + rho u - mu u^kappa
    v_t = lap v - u v

with zero-flux boundaries. The u-flux on a face is

    F = A(u) A(v) du/dn - U_up^2 A(v) dv/dn

where ``A`` is the arithmetic mean of the two adjacent cells and ``U_up`` is
the donor cell for the drift up the v-gradient: the lower-index cell when
dv/dn > 0, the higher-index cell otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NonFiniteField, PositivityViolation
from .grid import Field, Grid2D


@dataclass(frozen=True)
class ModelParams:
    epsilon: float = 0.0
    rho: float = 1.0
    mu: float = 1.0
    kappa: float = 2.0

    def __post_init__(self):
        if not (0.0 <= self.epsilon < 1.0):
            raise ValueError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if not self.rho > 0 or not self.mu > 0:
            raise ValueError("rho and mu must be positive")
        if not self.kappa >= 2:
            raise ValueError(f"kappa must be >= 2, got {self.kappa}")

    def source(self, u: np.ndarray) -> np.ndarray:
        if self.kappa == 2.0:
            return self.rho * u - self.mu * (u * u)
        return self.rho * u - self.mu * u ** self.kappa


@dataclass(eq=False)
class State:
    u: Field
    v: Field
    t: float = 0.0

    def __post_init__(self):
        if self.u.grid != self.v.grid:
            raise ValueError("u and v live on different grids")

    @property
    def grid(self) -> Grid2D:
        return self.u.grid

    def validate(self) -> None:
        for name, f in (("u", self.u), ("v", self.v)):
            if not np.isfinite(f.values).all():
                k = int(np.flatnonzero(~np.isfinite(f.flat))[0])
                raise NonFiniteField(f"{name} is non-finite at cell {k}")
        if (self.u.values < 0).any():
            k = int(np.argmin(self.u.flat))
            raise PositivityViolation(f"u < 0 at cell {k}: {self.u.flat[k]!r}",
                                      "u", k, float(self.u.flat[k]))
        if (self.v.values <= 0).any():
            k = int(np.argmin(self.v.flat))
            raise PositivityViolation(f"v <= 0 at cell {k}: {self.v.flat[k]!r}",
                                      "v", k, float(self.v.flat[k]))

    def copy(self) -> "State":
        return State(self.u.copy(), self.v.copy(), self.t)


class Workspace:
    """Preallocated face and cell buffers for one grid."""

    def __init__(self, grid: Grid2D, parallel: bool = False):
        ny, nx = grid.shape
        self.grid = grid
        self.ihx = 1.0 / grid.hx
        self.ihy = 1.0 / grid.hy
        self.fx = np.zeros((ny, nx + 1))
        self.fy = np.zeros((ny + 1, nx))
        self.gx = np.zeros((ny, nx + 1))
        self.gy = np.zeros((ny + 1, nx))
        self.dx = np.zeros((ny, nx + 1))
        self.dy = np.zeros((ny + 1, nx))
        self.wx = np.zeros((ny, nx + 1))
        self.wy = np.zeros((ny + 1, nx))
        self.acc = np.zeros(nx + 1)
        self.rowbad = np.zeros(2 * ny, dtype=np.int64)
        self.rhs, self.axpy, self.heun = _kernels.kernels(parallel)

    def evaluate(self, u: np.ndarray, v: np.ndarray, p: ModelParams,
                 ru: np.ndarray, rv: np.ndarray) -> tuple[float, float, float]:
        """Fill ru, rv; return (max face diffusivity, max drift speed, max u)."""
        return self.rhs(u, v, self.ihx, self.ihy, float(p.rho), float(p.mu),
                        float(p.kappa), self.fx, self.fy, self.gx, self.gy,
                        self.dx, self.dy, self.wx, self.wy, ru, rv, self.acc)


def _checked(s: State) -> Workspace:
    s.validate()
    return Workspace(s.grid)


def flux_u(s: State) -> tuple[np.ndarray, np.ndarray]:
    """Total u face flux (diffusion minus upwinded taxis); boundary faces are 0."""
    ws = _checked(s)
    ru = np.empty(s.grid.shape)
    rv = np.empty(s.grid.shape)
    ws.evaluate(s.u.values, s.v.values, ModelParams(), ru, rv)
    return ws.fx.copy(), ws.fy.copy()


def rhs_u(s: State, p: ModelParams = ModelParams()) -> Field:
    ws = _checked(s)
    ru = np.empty(s.grid.shape)
    rv = np.empty(s.grid.shape)
    ws.evaluate(s.u.values, s.v.values, p, ru, rv)
    return Field(s.grid, ru)


def rhs_v(s: State) -> Field:
    ws = _checked(s)
    ru = np.empty(s.grid.shape)
    rv = np.empty(s.grid.shape)
    ws.evaluate(s.u.values, s.v.values, ModelParams(), ru, rv)
    return Field(s.grid, rv)
