"""Cell-centred rectangle discretisation with zero-flux boundaries.

Cell values are stored as ``(ny, nx)`` arrays, so the flattened row-major
order is ``k = j * nx + i`` with ``x`` varying fastest. Face arrays follow the
same layout: x-faces are ``(ny, nx + 1)`` and y-faces ``(ny + 1, nx)``; the
first and last face in each direction lies on the boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NegativeField, NonFiniteField, NonpositiveField


@dataclass(frozen=True)
class Grid2D:
    nx: int
    ny: int
    lx: float = 1.0
    ly: float = 1.0

    def __post_init__(self):
        if int(self.nx) != self.nx or int(self.ny) != self.ny:
            raise ValueError("nx and ny must be integers")
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"need nx, ny >= 2, got {self.nx}x{self.ny}")
        if not (self.lx > 0 and self.ly > 0) or not (math.isfinite(self.lx) and math.isfinite(self.ly)):
            raise ValueError(f"domain lengths must be positive, got {self.lx}, {self.ly}")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        object.__setattr__(self, "lx", float(self.lx))
        object.__setattr__(self, "ly", float(self.ly))

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def h(self) -> float:
        return min(self.hx, self.hy)

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-centre coordinates as two ``(ny, nx)`` arrays."""
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y)

    def sample(self, fn) -> "Field":
        X, Y = self.centers()
        vals = np.broadcast_to(np.asarray(fn(X, Y), dtype=float), self.shape)
        return Field(self, np.array(vals))

    def constant(self, c: float) -> "Field":
        return Field(self, np.full(self.shape, float(c)))


@dataclass(eq=False)
class Field:
    """A scalar cell-centred function on ``grid``."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {vals.size}")
        self.values = vals.reshape(self.grid.shape)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)


def check_finite(f: Field, name: str = "field") -> None:
    if not np.isfinite(f.values).all():
        bad = int(np.flatnonzero(~np.isfinite(f.flat))[0])
        raise NonFiniteField(f"{name} has a non-finite value at cell {bad}")


def check_positive(f: Field, name: str = "field") -> None:
    check_finite(f, name)
    if (f.values <= 0).any():
        k = int(np.argmin(f.flat))
        raise NonpositiveField(f"{name} must be > 0, cell {k} holds {f.flat[k]!r}")


# --- array-level operators (no validation; used in hot paths) ---------------

def sum_cells(a: np.ndarray, grid: Grid2D) -> float:
    return float(grid.hx * grid.hy * np.sum(a))


def face_diffs(a: np.ndarray, grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
    ny, nx = grid.shape
    gx = np.zeros((ny, nx + 1))
    gy = np.zeros((ny + 1, nx))
    gx[:, 1:-1] = (a[:, 1:] - a[:, :-1]) / grid.hx
    gy[1:-1, :] = (a[1:, :] - a[:-1, :]) / grid.hy
    return gx, gy


def divergence(fx: np.ndarray, fy: np.ndarray, grid: Grid2D) -> np.ndarray:
    """Conservative face-difference divergence of a face flux."""
    return (fx[:, 1:] - fx[:, :-1]) / grid.hx + (fy[1:, :] - fy[:-1, :]) / grid.hy


def grad_sq(a: np.ndarray, grid: Grid2D) -> np.ndarray:
    """|grad a|^2 per cell: mean of squared face gradients in each direction."""
    gx, gy = face_diffs(a, grid)
    gx2 = gx * gx
    gy2 = gy * gy
    return 0.5 * (gx2[:, :-1] + gx2[:, 1:]) + 0.5 * (gy2[:-1, :] + gy2[1:, :])


def grad_cells(a: np.ndarray, grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
    """Gradient vector per cell from averaging the two bounding face gradients."""
    gx, gy = face_diffs(a, grid)
    return 0.5 * (gx[:, :-1] + gx[:, 1:]), 0.5 * (gy[:-1, :] + gy[1:, :])


def weighted_grad_cells(v: np.ndarray, grid: Grid2D, a: float, b: float,
                        g2: np.ndarray | None = None) -> np.ndarray:
    if g2 is None:
        g2 = grad_sq(v, grid)
    if a == 2:
        ga = g2
    elif a == 4:
        ga = g2 * g2
    elif a == 6:
        ga = g2 * g2 * g2
    else:
        ga = g2 ** (0.5 * a)
    if b == 0:
        return ga
    return ga / v ** b


# --- Field-level operations -------------------------------------------------

def integrate(f: Field) -> float:
    """Midpoint rule: hx * hy * sum of cell values."""
    check_finite(f)
    return sum_cells(f.values, f.grid)


def face_gradients(f: Field) -> tuple[np.ndarray, np.ndarray]:
    """Difference quotients on all faces; boundary faces carry 0."""
    check_finite(f)
    return face_diffs(f.values, f.grid)


def lp_norm(f: Field, p: float) -> float:
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    check_finite(f)
    if (f.values < 0).any():
        k = int(np.argmin(f.flat))
        raise NegativeField(f"lp_norm needs f >= 0; cell {k} holds {f.flat[k]!r}")
    return sum_cells(f.values ** p, f.grid) ** (1.0 / p)


def weighted_gradient_functional(v: Field, a: int, b: int) -> float:
    """Integral of |grad v|^a / v^b over the rectangle."""
    if a < 2 or b < 0:
        raise ValueError(f"need a >= 2 and b >= 0, got a={a}, b={b}")
    check_positive(v, "v")
    return sum_cells(weighted_grad_cells(v.values, v.grid, a, b), v.grid)


# --- snapshot files ---------------------------------------------------------

def write_field(path, f: Field, t: float = 0.0) -> None:
    g = f.grid
    lines = [f"# {g.nx} {g.ny} {g.lx!r} {g.ly!r} {float(t)!r}"]
    lines.extend(f"{x:.17g}" for x in f.flat.tolist())
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_field(path) -> tuple[Field, float]:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith("#"):
        raise ValueError(f"{path}: missing '# nx ny lx ly t' header")
    parts = text[0][1:].split()
    if len(parts) != 5:
        raise ValueError(f"{path}: malformed header {text[0]!r}")
    grid = Grid2D(int(parts[0]), int(parts[1]), float(parts[2]), float(parts[3]))
    vals = np.array([float(s) for s in text[1:] if s.strip()])
    if vals.size != grid.size:
        raise ValueError(f"{path}: expected {grid.size} values, found {vals.size}")
    return Field(grid, vals), float(parts[4])
