"""Functionals tracked along a trajectory and the bound checks built on them."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import NonpositiveField, RangeError
from .grid import Field, grad_sq, sum_cells

BASE_COLUMNS = ("t", "mass_u", "mass_v", "sup_u", "sup_v", "inf_v")
TAIL_COLUMNS = ("entropy", "fisher_v", "w4", "w6", "cross_uv", "diss_u",
                "diss_mixed", "sup_grad_v", "energy_F", "lyap_y")


def p_label(p: float) -> str:
    return f"norm_u_p{float(p):g}"


@dataclass(frozen=True)
class MonitorConfig:
    p_list: tuple = (2.0, 3.0, 4.0)
    b_weight: float = 1.0
    window_tau: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "p_list", tuple(float(p) for p in self.p_list))
        if any(not p > 1 for p in self.p_list):
            raise ValueError("every p in p_list must exceed 1")
        if not self.b_weight > 0:
            raise ValueError("b_weight must be positive")
        if not self.window_tau > 0:
            raise ValueError("window_tau must be positive")


@dataclass
class MonitorRecord:
    t: float
    mass_u: float
    mass_v: float
    sup_u: float
    sup_v: float
    inf_v: float
    norm_u_p: dict
    entropy: float
    fisher_v: float
    w4: float
    w6: float
    cross_uv: float
    diss_u: float
    diss_mixed: float
    sup_grad_v: float
    energy_F: float
    lyap_y: float

    def as_row(self) -> dict:
        row = {k: getattr(self, k) for k in BASE_COLUMNS}
        for p, val in self.norm_u_p.items():
            row[p_label(p)] = val
        row.update({k: getattr(self, k) for k in TAIL_COLUMNS})
        return row


def record(s, cfg: MonitorConfig = MonitorConfig()) -> MonitorRecord:
    grid = s.grid
    u = s.u.values
    v = s.v.values
    if (v <= 0).any() or not np.isfinite(v).all():
        k = int(np.argmin(np.where(np.isfinite(v), v, -np.inf).reshape(-1)))
        raise NonpositiveField(f"v must be > 0; cell {k} holds {v.reshape(-1)[k]!r}")

    def integral(a):
        return sum_cells(a, grid)

    norms = {p: integral(u ** p) ** (1.0 / p) for p in cfg.p_list}
    ulogu = np.zeros_like(u)
    np.multiply(u, np.log(u, out=np.zeros_like(u), where=u > 0), out=ulogu, where=u > 0)
    entropy = integral(ulogu)
    g2 = grad_sq(v, grid)
    inv_v = 1.0 / v
    q = g2 * inv_v
    fisher = integral(q)
    q2 = q * q * inv_v          # |grad v|^4 / v^3
    w4 = integral(q2)
    w6 = integral(q2 * q * inv_v)   # |grad v|^6 / v^5
    cross = integral(u * v)
    diss_u = integral(v * grad_sq(u, grid))
    diss_mixed = integral(u * q)
    return MonitorRecord(
        t=float(s.t),
        mass_u=integral(u),
        mass_v=integral(v),
        sup_u=float(u.max()),
        sup_v=float(v.max()),
        inf_v=float(v.min()),
        norm_u_p=norms,
        entropy=entropy,
        fisher_v=fisher,
        w4=w4,
        w6=w6,
        cross_uv=cross,
        diss_u=diss_u,
        diss_mixed=diss_mixed,
        sup_grad_v=math.sqrt(float(g2.max())),
        energy_F=4.0 * cfg.b_weight * entropy + w4,
        lyap_y=entropy - cross + 0.5 * fisher,
    )


# --- series helpers ---------------------------------------------------------

def columns(series) -> dict[str, np.ndarray]:
    """Column arrays from a record list (or pass a column dict through)."""
    if isinstance(series, dict):
        return series
    if not series:
        return {}
    rows = [r.as_row() for r in series]
    return {k: np.array([row[k] for row in rows], dtype=float) for k in rows[0]}


def write_csv(path, series) -> None:
    rows = [r.as_row() for r in series]
    names = list(rows[0])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(names) + "\n")
        for row in rows:
            fh.write(",".join(f"{row[k]:.17g}" for k in names) + "\n")


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = [[float(x) for x in row] for row in reader if row]
    arr = np.array(data, dtype=float).reshape(-1, len(header))
    return {name: arr[:, k].copy() for k, name in enumerate(header)}


def _cumulative(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    c = np.zeros_like(t)
    np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(t), out=c[1:])
    return c


def _cum_at(t, f, c, x):
    """Trapezoid integral from t[0] to x of the piecewise-linear interpolant."""
    k = np.clip(np.searchsorted(t, x, side="right") - 1, 0, len(t) - 2)
    dx = x - t[k]
    slope = (f[k + 1] - f[k]) / (t[k + 1] - t[k])
    fx = f[k] + slope * dx
    return c[k] + 0.5 * (f[k] + fx) * dx


def integral_between(t, f, a: float, b: float) -> float:
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    if b == a:
        return 0.0
    span = max(1.0, abs(t[-1])) * 1e-12
    if a < t[0] - span or b > t[-1] + span or b < a:
        raise RangeError(f"series covers [{t[0]}, {t[-1]}], window is [{a}, {b}]")
    a = min(max(a, t[0]), t[-1])
    b = min(max(b, t[0]), t[-1])
    c = _cumulative(t, f)
    return float(_cum_at(t, f, c, b) - _cum_at(t, f, c, a))


def window_sweep(t, f, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Window integrals over [t_k, t_k + tau] for every sample start that fits."""
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    if len(t) < 2:
        raise RangeError("need at least two samples")
    slack = 1e-12 * max(1.0, abs(t[-1]))
    starts = t[t + tau <= t[-1] + slack]
    if starts.size == 0:
        raise RangeError(f"no window of length {tau} fits in [{t[0]}, {t[-1]}]")
    c = _cumulative(t, f)
    ends = np.minimum(starts + tau, t[-1])
    return starts, _cum_at(t, f, c, ends) - _cum_at(t, f, c, starts)


def window_integral(series, name: str, t: float, tau: float) -> float:
    """Trapezoid integral of one monitored quantity over [t, t + tau]."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    cols = columns(series)
    if "t" not in cols or len(cols["t"]) < 1:
        raise RangeError("empty series")
    if tau == 0:
        return 0.0
    if len(cols["t"]) < 2:
        raise RangeError("need at least two samples")
    return integral_between(cols["t"], cols[name], t, t + tau)


# --- bound report -----------------------------------------------------------

ABS_TOL = 1e-8
REL_TOL = 1e-6
TIME_TOL = 1e-4
LOWER = {"B5_inf_v": "lower"}


@dataclass
class BoundEntry:
    name: str
    kind: str           # upper | lower | info
    asserted: float
    observed: float
    margin: float
    verdict: str        # pass | fail | informational

    def line(self) -> str:
        return f"{self.name} {self.verdict} {self.asserted:.17g} {self.observed:.17g} {self.margin:.17g}"


@dataclass
class BoundReport:
    entries: list = field(default_factory=list)

    def __getitem__(self, name) -> BoundEntry:
        for e in self.entries:
            if e.name == name or e.name.split("_")[0] == name:
                return e
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(e.verdict != "fail" for e in self.entries)

    def to_text(self) -> str:
        return "".join(e.line() + "\n" for e in self.entries)

    def write(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def from_text(cls, text: str) -> "BoundReport":
        entries = []
        for line in text.splitlines():
            parts = line.split()
            if len(parts) != 5:
                continue
            name, verdict, a, o, m = parts
            kind = "info" if verdict == "informational" else LOWER.get(name, "upper")
            entries.append(BoundEntry(name, kind, float(a), float(o), float(m), verdict))
        return cls(entries)


def _upper(name, asserted, observed, rel=REL_TOL, abs_=ABS_TOL) -> BoundEntry:
    ok = observed <= asserted * (1.0 + rel) + abs_
    return BoundEntry(name, "upper", asserted, observed, asserted - observed,
                      "pass" if ok else "fail")


def check_bounds(series, u0: Field, v0: Field, p=None, cfg: MonitorConfig = MonitorConfig()) -> BoundReport:
    """Compare a monitor series against the a-priori bounds.

    B1 sup v <= sup v0; B2 mass_u <= |Omega| + int u0; B3 v-mass plus consumed
    nutrient equals int v0; B4 window integrals of int u^2 stay below 2m;
    B5 inf v(t) >= inf v0 * exp(-c t) with c = sup_t sup u; B6 reports the
    suprema of the remaining functionals without a numeric bound.
    """
    cols = columns(series)
    t = cols["t"]
    area = u0.grid.area
    m = area + sum_cells(u0.values, u0.grid)
    sup_v0 = float(v0.values.max())
    inf_v0 = float(v0.values.min())
    mass_v0 = sum_cells(v0.values, v0.grid)
    rep = BoundReport()

    rep.entries.append(_upper("B1_sup_v", sup_v0, float(cols["sup_v"].max())))
    rep.entries.append(_upper("B2_mass_u", m, float(cols["mass_u"].max())))

    consumed = _cumulative(t, cols["cross_uv"])
    dev = float(np.max(np.abs(cols["mass_v"] + consumed - mass_v0)))
    rep.entries.append(_upper("B3_conservation_v", TIME_TOL * abs(mass_v0), dev, rel=0.0, abs_=0.0))

    label = p_label(2.0)
    tau = cfg.window_tau
    if label in cols and len(t) >= 2 and t[-1] - t[0] >= tau:
        _, win = window_sweep(t, cols[label] ** 2, tau)
        rep.entries.append(_upper("B4_window_u2", 2.0 * m, float(win.max()), rel=TIME_TOL, abs_=0.0))
    else:
        rep.entries.append(BoundEntry("B4_window_u2", "info", 2.0 * m, math.nan, math.nan, "informational"))

    c1 = float(cols["sup_u"].max())
    lower = inf_v0 * np.exp(-c1 * (t - t[0]))
    slack = cols["inf_v"] - lower * (1.0 - REL_TOL) + ABS_TOL
    k = int(np.argmin(cols["inf_v"] - lower))
    rep.entries.append(BoundEntry("B5_inf_v", "lower", float(lower[k]), float(cols["inf_v"][k]),
                                  float(cols["inf_v"][k] - lower[k]),
                                  "pass" if (slack >= 0).all() else "fail"))

    info = ["entropy", "w4", "w6"] + [c for c in cols if c.startswith("norm_u_p")] + ["sup_u", "sup_grad_v"]
    for name in info:
        rep.entries.append(BoundEntry(f"B6_sup_{name}", "info", math.nan,
                                      float(cols[name].max()), math.nan, "informational"))
    return rep
