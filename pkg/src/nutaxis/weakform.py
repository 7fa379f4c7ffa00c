"""Residuals of the weak-solution integral identities on stored snapshots.

For a test function phi(x, y, t) = X(x, y) eta(t) with a Neumann cosine mode X
and a smooth temporal cutoff eta the identities read

    -int int u phi_t - int u0 phi(0)
        = -1/2 int int v grad(u^2).grad phi + int int u^2 v grad v.grad phi
          + int int (rho u - mu u^kappa) phi

     int int v phi_t + int v0 phi(0) = int int grad v.grad phi + int int u v phi

Space integrals use the midpoint rule with cell gradients from averaged face
gradients. The phi_t term is summed as sum_k (f_k + f_{k+1})/2 (eta_{k+1} - eta_k),
which telescopes exactly against the phi(0) term for time-constant data; all
other time integrals use the trapezoid rule on the snapshot times.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import RangeError
from .grid import Grid2D, grad_cells, read_field
from .model import ModelParams
from .stepper import Snapshot


def _f(x):
    return math.exp(-1.0 / x) if x > 0 else 0.0


@dataclass(frozen=True)
class TestFunction:
    __test__ = False   # keep pytest from collecting this class

    kx: int
    ky: int
    t_cut: float
    w: float | None = None

    def __post_init__(self):
        if self.kx < 0 or self.ky < 0 or int(self.kx) != self.kx or int(self.ky) != self.ky:
            raise ValueError("wavenumbers must be nonnegative integers")
        if self.w is None:
            object.__setattr__(self, "w", 0.1 * self.t_cut)
        if not (self.w > 0 and self.t_cut - self.w > 0):
            raise ValueError(f"need 0 < w < t_cut, got w={self.w}, t_cut={self.t_cut}")

    def eta(self, t: float) -> float:
        """1 up to t_cut - w, 0 from t_cut on, C-infinity and monotone between."""
        s = (t - (self.t_cut - self.w)) / self.w
        if s <= 0:
            return 1.0
        if s >= 1:
            return 0.0
        a, b = _f(1.0 - s), _f(s)
        return a / (a + b)

    def space(self, grid: Grid2D) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """X and its exact gradient at cell centres."""
        X, Y = grid.centers()
        ax = self.kx * math.pi / grid.lx
        ay = self.ky * math.pi / grid.ly
        cx, cy = np.cos(ax * X), np.cos(ay * Y)
        return cx * cy, -ax * np.sin(ax * X) * cy, -ay * cx * np.sin(ay * Y)


def load_snapshots(directory) -> tuple[Grid2D, list[Snapshot]]:
    """Read ``u_<step>.fld`` / ``v_<step>.fld`` pairs, ordered by step."""
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"snapshot directory {d} does not exist")
    steps = sorted(int(m.group(1)) for p in d.glob("u_*.fld")
                   if (m := re.fullmatch(r"u_(\d+)\.fld", p.name)))
    snaps = []
    grid = None
    for k in steps:
        uf, t = read_field(d / f"u_{k:08d}.fld")
        vf, tv = read_field(d / f"v_{k:08d}.fld")
        if uf.grid != vf.grid or t != tv:
            raise RangeError(f"snapshot {k}: u and v files disagree")
        if grid is None:
            grid = uf.grid
        elif uf.grid != grid:
            raise RangeError(f"snapshot {k} lives on a different grid")
        snaps.append(Snapshot(k, t, uf.values, vf.values))
    if not snaps:
        raise RangeError(f"no snapshots found in {d}")
    return grid, snaps


def _window(snaps, tf: TestFunction):
    snaps = sorted(snaps, key=lambda s: s.t)
    if len(snaps) < 2:
        raise RangeError("need at least two snapshots")
    t0 = float(snaps[0].t)
    if abs(t0) > 1e-12:
        raise RangeError(f"snapshots must start at t = 0, first is at {t0}")
    last = next((k for k, s in enumerate(snaps) if s.t >= tf.t_cut - 1e-12), None)
    if last is None:
        raise RangeError(f"snapshots end at t = {snaps[-1].t}, before t_cut = {tf.t_cut}")
    return snaps[: last + 1]


def _time_sums(ts, eta, spatial):
    """(telescoped phi_t integral of f, trapezoid integral of g*eta) pieces."""
    f = np.array([x[0] for x in spatial])
    g = np.array([x[1] for x in spatial])
    d_eta = np.diff(eta)
    phit = float(np.sum(0.5 * (f[1:] + f[:-1]) * d_eta))
    ge = g * eta
    trap = float(np.sum(0.5 * (ge[1:] + ge[:-1]) * np.diff(ts)))
    return phit, trap, f[0] * eta[0]


def _terms(tf):
    """A TestFunction or a sequence of (coefficient, TestFunction) pairs."""
    if isinstance(tf, TestFunction):
        return [(1.0, tf)]
    terms = [(float(c), f) for c, f in tf]
    if not terms or not all(isinstance(f, TestFunction) for _, f in terms):
        raise ValueError("expected a TestFunction or (coefficient, TestFunction) pairs")
    return terms


def sides_u(snapshots, grid: Grid2D, tf, p: ModelParams = ModelParams()) -> tuple[float, float]:
    """(lhs, rhs) of the u identity; linear in the test function."""
    lhs_total = rhs_total = 0.0
    for coef, f in _terms(tf):
        snaps = _window(snapshots, f)
        X, Xx, Xy = f.space(grid)
        cell = grid.hx * grid.hy
        ts = np.array([s.t for s in snaps], dtype=float)
        eta = np.array([f.eta(t) for t in ts])
        spatial = []
        for s in snaps:
            u = np.asarray(s.u, float).reshape(grid.shape)
            v = np.asarray(s.v, float).reshape(grid.shape)
            u2 = u * u
            g2x, g2y = grad_cells(u2, grid)
            gvx, gvy = grad_cells(v, grid)
            src = p.rho * u - p.mu * (u2 if p.kappa == 2.0 else u ** p.kappa)
            rhs = (-0.5 * v * (g2x * Xx + g2y * Xy) + u2 * v * (gvx * Xx + gvy * Xy) + src * X)
            spatial.append((cell * float(np.sum(u * X)), cell * float(np.sum(rhs))))
        phit, rhs, init = _time_sums(ts, eta, spatial)
        lhs_total += coef * (-phit - init)
        rhs_total += coef * rhs
    return lhs_total, rhs_total


def sides_v(snapshots, grid: Grid2D, tf) -> tuple[float, float]:
    """(lhs, rhs) of the v identity; linear in the test function."""
    lhs_total = rhs_total = 0.0
    for coef, f in _terms(tf):
        snaps = _window(snapshots, f)
        X, Xx, Xy = f.space(grid)
        cell = grid.hx * grid.hy
        ts = np.array([s.t for s in snaps], dtype=float)
        eta = np.array([f.eta(t) for t in ts])
        spatial = []
        for s in snaps:
            u = np.asarray(s.u, float).reshape(grid.shape)
            v = np.asarray(s.v, float).reshape(grid.shape)
            gvx, gvy = grad_cells(v, grid)
            rhs = gvx * Xx + gvy * Xy + u * v * X
            spatial.append((cell * float(np.sum(v * X)), cell * float(np.sum(rhs))))
        phit, rhs, init = _time_sums(ts, eta, spatial)
        lhs_total += coef * (phit + init)
        rhs_total += coef * rhs
    return lhs_total, rhs_total


def _normalized(lhs, rhs):
    return abs(lhs - rhs) / max(1.0, abs(lhs))


def residual_u(snapshots, grid: Grid2D, tf, p: ModelParams = ModelParams()) -> float:
    """|lhs - rhs| / max(1, |lhs|) for the u identity."""
    return _normalized(*sides_u(snapshots, grid, tf, p))


def residual_v(snapshots, grid: Grid2D, tf) -> float:
    """|lhs - rhs| / max(1, |lhs|) for the v identity."""
    return _normalized(*sides_v(snapshots, grid, tf))


def parse_modes(text: str) -> list[tuple[int, int]]:
    """``"1,0;1,1"`` -> [(1, 0), (1, 1)]."""
    out = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        kx, ky = (int(x) for x in part.split(","))
        out.append((kx, ky))
    if not out:
        raise ValueError("no modes given")
    return out
