"""Explicit adaptive time stepping.

Forward Euler (default) keeps the discrete mass identities exact:

    sum(u') = sum(u) + dt * sum(rho u - mu u^kappa)
    sum(v') = sum(v) - dt * sum(u v)

because the flux divergence and the Neumann Laplacian telescope. Negative
densities are never clamped; a violation stops the step with a diagnostic.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import NonFinite, PositivityViolation, StepCollapse
from .grid import Field, write_field
from .model import ModelParams, State, Workspace
from .monitors import MonitorConfig, MonitorRecord, record

log = logging.getLogger(__name__)

SCHEMES = ("euler", "heun")


@dataclass(frozen=True)
class StepControl:
    cfl: float = 0.4
    dt_min: float = 1e-12
    dt_max: float = 1e-2
    scheme: str = "euler"
    blowup: float = 1e6
    parallel: bool = False

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not 0 < self.dt_min <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_max")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")


@dataclass(frozen=True)
class RunConfig:
    t_end: float
    snapshot_every: float = 1.0
    monitor_every: int = 100
    window_tau: float | None = None

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if not self.snapshot_every > 0:
            raise ValueError("snapshot_every must be positive")
        if int(self.monitor_every) != self.monitor_every or self.monitor_every < 1:
            raise ValueError("monitor_every must be a positive integer")
        if self.window_tau is None:
            object.__setattr__(self, "window_tau", min(1.0, self.t_end / 2))
        if not 0 < self.window_tau < self.t_end:
            raise ValueError(f"window_tau must lie in (0, t_end), got {self.window_tau}")


def dt_budget(dmax: float, wmax: float, umax: float, h: float,
              p: ModelParams, c: StepControl) -> float:
    """Unclamped cfl * min(diffusion, v-diffusion, reaction, drift) budget."""
    return _kernels.budget(float(dmax), float(wmax), float(umax), float(h),
                           float(p.rho), float(p.mu), float(p.kappa), float(c.cfl))


def _clamp(dt: float, c: StepControl) -> float:
    if dt < c.dt_min:
        raise StepCollapse(f"stable step {dt:.3e} fell below dt_min={c.dt_min:.1e}", dt)
    return min(dt, c.dt_max)


def stable_dt(s: State, p: ModelParams = ModelParams(), c: StepControl = StepControl()) -> float:
    s.validate()
    ws = Workspace(s.grid)
    ru = np.empty(s.grid.shape)
    rv = np.empty(s.grid.shape)
    dmax, wmax, umax = ws.evaluate(s.u.values, s.v.values, p, ru, rv)
    return _clamp(dt_budget(dmax, wmax, umax, s.grid.h, p, c), c)


class Integrator:
    """Buffers and kernels for repeated steps on one grid."""

    def __init__(self, grid, p: ModelParams, c: StepControl):
        self.grid = grid
        self.p = p
        self.c = c
        self.ws = Workspace(grid, parallel=c.parallel)
        shape = grid.shape
        self.ru = np.empty(shape)
        self.rv = np.empty(shape)
        self.ru2 = np.empty(shape)
        self.rv2 = np.empty(shape)
        self.u1 = np.empty(shape)
        self.v1 = np.empty(shape)
        self.umax = 0.0

    def budget(self, u: np.ndarray, v: np.ndarray) -> float:
        """Evaluate the rhs at (u, v) into self.ru/rv and return the raw budget."""
        dmax, wmax, self.umax = self.ws.evaluate(u, v, self.p, self.ru, self.rv)
        return dt_budget(dmax, wmax, self.umax, self.grid.h, self.p, self.c)

    def _check(self, un, vn, stage=""):
        ny = self.grid.ny
        bad = self.ws.rowbad
        rows = np.flatnonzero(bad[:ny])
        if rows.size == 0:
            return
        j = int(rows[0])
        code = int(bad[j])
        i = int(bad[ny + j])
        k = j * self.grid.nx + i
        if code == 3:
            raise NonFinite(f"non-finite value{stage} at cell {k} (i={i}, j={j})")
        name, arr = ("u", un) if code == 1 else ("v", vn)
        raise PositivityViolation(
            f"{name} lost positivity{stage} at cell {k} (i={i}, j={j}): {arr[j, i]!r}",
            name, k, float(arr[j, i]))

    def advance(self, u, v, dt, un, vn):
        """One step from (u, v) into (un, vn); assumes budget(u, v) was just called."""
        ws = self.ws
        if self.c.scheme == "euler":
            ws.axpy(u, self.ru, v, self.rv, dt, un, vn, ws.rowbad)
            self._check(un, vn)
            return
        ws.axpy(u, self.ru, v, self.rv, dt, self.u1, self.v1, ws.rowbad)
        self._check(self.u1, self.v1, " in the predictor stage")
        ws.evaluate(self.u1, self.v1, self.p, self.ru2, self.rv2)
        ws.heun(u, self.ru, self.ru2, v, self.rv, self.rv2, dt, un, vn, ws.rowbad)
        self._check(un, vn)

    def _blowup(self, umax):
        raise StepCollapse(f"sup u = {umax:.3e} exceeded the blow-up threshold {self.c.blowup:.1e}")

    def march(self, u, v, un, vn, clock, t_target, tol, nmax):
        """Up to nmax steps toward t_target (hit exactly).

        ``clock`` is a float array [t, dt_lo, dt_hi, info] updated in place.
        Returns (steps, swapped); when swapped is true the current state sits
        in (un, vn). Errors are raised after the counters are updated.
        """
        c = self.c
        if c.scheme == "euler" and not c.parallel:
            ws = self.ws
            status, n, parity = _kernels.euler_chunk(
                u, v, un, vn, self.ru, self.rv, ws.ihx, ws.ihy,
                float(self.p.rho), float(self.p.mu), float(self.p.kappa),
                ws.fx, ws.fy, ws.gx, ws.gy, ws.dx, ws.dy, ws.wx, ws.wy, ws.acc, ws.rowbad,
                float(self.grid.h), float(c.cfl), float(c.dt_min), float(c.dt_max),
                float(c.blowup), float(t_target), float(tol), int(nmax), clock)
            self.pending = None
            if status == 1:
                self.pending = lambda: self._blowup(clock[3])
            elif status == 2:
                self.pending = lambda: _clamp(clock[3], c)
            elif status == 3:
                cur, nxt = ((un, vn), (u, v)) if parity else ((u, v), (un, vn))
                self.pending = lambda: self._check(*nxt)
            return n, bool(parity)
        return self._march_py(u, v, un, vn, clock, t_target, tol, nmax)

    def _march_py(self, u, v, un, vn, clock, t_target, tol, nmax):
        t, dtlo, dthi = clock[0], clock[1], clock[2]
        n = 0
        swapped = False
        self.pending = None
        try:
            while n < nmax and t < t_target - tol:
                raw = self.budget(u, v)
                if self.umax > self.c.blowup:
                    self._blowup(self.umax)
                dt = _clamp(raw, self.c)
                hit = dt >= t_target - t - tol
                if hit:
                    dt = t_target - t
                self.advance(u, v, dt, un, vn)
                u, un = un, u
                v, vn = vn, v
                swapped = not swapped
                t = t_target if hit else t + dt
                n += 1
                dtlo = min(dtlo, dt)
                dthi = max(dthi, dt)
        except (StepCollapse, PositivityViolation, NonFinite) as e:
            err = e

            def reraise():
                raise err
            self.pending = reraise
        clock[0], clock[1], clock[2] = t, dtlo, dthi
        return n, swapped

    def raise_pending(self):
        if self.pending is not None:
            f, self.pending = self.pending, None
            f()


def step(s: State, dt: float, p: ModelParams = ModelParams(), c: StepControl = StepControl()) -> State:
    s.validate()
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    it = Integrator(s.grid, p, c)
    it.budget(s.u.values, s.v.values)
    un = np.empty(s.grid.shape)
    vn = np.empty(s.grid.shape)
    it.advance(s.u.values, s.v.values, dt, un, vn)
    return State(Field(s.grid, un), Field(s.grid, vn), s.t + dt)


# --- snapshot sinks ---------------------------------------------------------

class SnapshotWriter:
    """Writes ``u_<step>.fld`` / ``v_<step>.fld`` into a directory."""

    def __init__(self, outdir):
        self.outdir = Path(outdir)
        self.outdir.mkdir(parents=True, exist_ok=True)

    def __call__(self, step: int, s: State) -> None:
        write_field(self.outdir / f"u_{step:08d}.fld", s.u, s.t)
        write_field(self.outdir / f"v_{step:08d}.fld", s.v, s.t)


@dataclass
class Snapshot:
    step: int
    t: float
    u: np.ndarray
    v: np.ndarray


class SnapshotStore:
    """Keeps copies of every emitted snapshot in memory."""

    def __init__(self):
        self.snapshots: list[Snapshot] = []

    def __call__(self, step: int, s: State) -> None:
        self.snapshots.append(Snapshot(step, s.t, s.u.values.copy(), s.v.values.copy()))

    def __len__(self):
        return len(self.snapshots)

    def __getitem__(self, k):
        return self.snapshots[k]


# --- run --------------------------------------------------------------------

TERMINATIONS = ("completed", "step_collapse", "positivity_violation", "non_finite")


@dataclass
class RunResult:
    state: State
    reason: str
    series: list[MonitorRecord]
    steps: int
    message: str = ""
    dt_smallest: float = math.inf
    dt_largest: float = 0.0

    @property
    def completed(self) -> bool:
        return self.reason == "completed"


def run(s0: State, p: ModelParams, c: StepControl, r: RunConfig, sinks=(),
        monitor: MonitorConfig | None = None) -> RunResult:
    s0.validate()
    grid = s0.grid
    if monitor is None:
        monitor = MonitorConfig(window_tau=r.window_tau)
    it = Integrator(grid, p, c)
    u = s0.u.values.copy()
    v = s0.v.values.copy()
    un = np.empty(grid.shape)
    vn = np.empty(grid.shape)
    t0 = float(s0.t)
    t_final = t0 + r.t_end
    clock = np.array([t0, math.inf, 0.0, 0.0])
    every = int(r.monitor_every)

    def current():
        return State(Field(grid, u), Field(grid, v), float(clock[0]))

    def emit(step):
        snap = current()
        for sink in sinks:
            sink(step, snap)

    series = [record(current(), monitor)]
    emit(0)
    n = 0
    k_snap = 1
    last_recorded = 0
    last_snap = 0
    reason, message = "completed", ""
    tol = 1e-12 * max(1.0, abs(t_final))
    try:
        while clock[0] < t_final - tol:
            t_snap = t0 + k_snap * r.snapshot_every
            target = min(t_snap, t_final)
            steps, swapped = it.march(u, v, un, vn, clock, target, tol, every - n % every)
            if swapped:
                u, un = un, u
                v, vn = vn, v
            n += steps
            if steps and n % every == 0:
                series.append(record(current(), monitor))
                last_recorded = n
            it.raise_pending()
            if abs(clock[0] - t_snap) <= tol and last_snap != n:
                emit(n)
                last_snap = n
                k_snap += 1
            elif clock[0] >= t_snap - tol:
                k_snap += 1
    except StepCollapse as e:
        reason, message = "step_collapse", str(e)
    except PositivityViolation as e:
        reason, message = "positivity_violation", str(e)
    except NonFinite as e:
        reason, message = "non_finite", str(e)
    if reason != "completed":
        log.warning("run stopped at t=%.6g after %d steps: %s", clock[0], n, message)
    if last_recorded != n:
        series.append(record(current(), monitor))
    if last_snap != n:
        emit(n)
    return RunResult(current().copy(), reason, series, n, message, float(clock[1]), float(clock[2]))
