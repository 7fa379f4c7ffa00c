"""Closed-form bounds of three ODE comparison lemmas and time-series validators.

L21: z' + a z <= h with window integrals of h at most b gives
     z <= max{z(0) + b, b/(a tau) + 2b}.
L22: z' <= a z + b with window integrals of a, b, z at most a1, a2, a3 gives
     z <= (a3/tau + a2) e^{a1}   (uniform Gronwall).
L23: z' + a z <= b z + c with window integrals of b, c at most b1, c1 and of
     a - b at least rho > 0 gives
     z <= z(0) e^{b1} + c1 e^{2 b1} / (1 - e^{-rho}) + c1 e^{b1}.

Window integrals use the trapezoid rule with a window starting at every
sample time that leaves room for a full window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import RangeError
from .monitors import window_sweep

LEMMAS = ("L21", "L22", "L23")
REQUIRED_AUX = {"L21": ("h",), "L22": ("a", "b"), "L23": ("a", "b", "c")}
DIFF_SLACK = 1e-6
CONCLUSION_SLACK = 1e-9


def _positive(**kw):
    for k, x in kw.items():
        if not (x > 0 and math.isfinite(x)):
            raise ValueError(f"{k} must be positive and finite, got {x}")


def _nonneg(**kw):
    for k, x in kw.items():
        if not (x >= 0 and math.isfinite(x)):
            raise ValueError(f"{k} must be nonnegative and finite, got {x}")


def lemma21_bound(z0: float, a: float, b: float, tau: float) -> float:
    _positive(a=a, b=b, tau=tau)
    _nonneg(z0=z0)
    return max(z0 + b, b / (a * tau) + 2.0 * b)


def lemma22_bound(a1: float, a2: float, a3: float, tau: float) -> float:
    _nonneg(a1=a1, a2=a2, a3=a3)
    _positive(tau=tau)
    return (a3 / tau + a2) * math.exp(a1)


def lemma23_bound(z0: float, b1: float, c1: float, rho: float) -> float:
    _nonneg(z0=z0, b1=b1, c1=c1)
    _positive(rho=rho)
    e = math.exp(b1)
    return z0 * e + c1 * e * e / (-math.expm1(-rho)) + c1 * e


@dataclass
class LemmaSeries:
    times: np.ndarray
    z: np.ndarray
    aux: dict = field(default_factory=dict)
    tau: float = 1.0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        self.aux = {k: np.asarray(v, dtype=float) for k, v in self.aux.items()}
        n = len(self.times)
        if n < 2:
            raise RangeError("a lemma series needs at least two samples")
        if self.z.shape != (n,) or any(v.shape != (n,) for v in self.aux.values()):
            raise RangeError("all series must have the same length")
        if not np.all(np.diff(self.times) > 0):
            raise RangeError("times must be strictly increasing")
        if not (self.tau > 0 and self.tau < self.times[-1] - self.times[0]):
            raise RangeError(f"tau must lie in (0, {self.times[-1] - self.times[0]}), got {self.tau}")
        for name, arr in [("z", self.z), *self.aux.items()]:
            if not np.isfinite(arr).all():
                raise RangeError(f"series {name} has non-finite entries")


@dataclass
class Validation:
    lemma: str
    hypotheses_hold: bool
    window_sups: dict
    bound: float
    conclusion_holds: bool
    max_violation: float
    notes: list = field(default_factory=list)


def _window_sup(s: LemmaSeries, arr) -> float:
    return float(window_sweep(s.times, arr, s.tau)[1].max())


def _window_inf(s: LemmaSeries, arr) -> float:
    return float(window_sweep(s.times, arr, s.tau)[1].min())


def _diff_ok(dz: np.ndarray, rhs: np.ndarray, scale: np.ndarray) -> bool:
    """Forward differences dz[k] against the sampled right side rhs.

    The secant slope equals z' somewhere inside [t_k, t_k+1], so it is
    compared with the larger endpoint value of the right side; exact
    solutions pass instead of failing by O(dt). DIFF_SLACK is relative to
    the term magnitudes.
    """
    cap = np.maximum(rhs[:-1], rhs[1:])
    return bool(np.all(dz <= cap + DIFF_SLACK * scale))


def validate(series: LemmaSeries, which: str, params: dict | None = None) -> Validation:
    """Check a series against the hypotheses and conclusion of one lemma.

    ``params`` may pin constants (L21 needs ``a``; ``b``, ``a1``..``a3``,
    ``b1``, ``c1``, ``rho`` default to the empirical window extrema). A pinned
    constant smaller than its empirical counterpart fails the hypotheses.
    """
    if which not in LEMMAS:
        raise ValueError(f"unknown lemma {which!r}; choose from {LEMMAS}")
    params = dict(params or {})
    missing = [k for k in REQUIRED_AUX[which] if k not in series.aux]
    if missing:
        raise RangeError(f"{which} needs companion series {missing}")
    s = series
    t, z = s.times, s.z
    dt = np.diff(t)
    dz = np.diff(z) / dt
    zl = z[:-1]
    # magnitude of the forward difference itself, so cancellation noise in
    # z[k+1] - z[k] is covered by the relative slack
    zscale = np.abs(dz) + (np.abs(z[1:]) + np.abs(zl)) / dt * 1e-9
    notes = []
    ok = bool(np.all(z >= 0))
    if not ok:
        notes.append("z takes negative values")

    def pin(name, empirical, upper=True):
        nonlocal ok
        if name not in params:
            return empirical
        val = float(params[name])
        good = empirical <= val * (1 + DIFF_SLACK) if upper else empirical >= val * (1 - DIFF_SLACK)
        if not good:
            ok = False
            notes.append(f"{name}={val} is violated by the empirical value {empirical}")
        return val

    mask = np.ones_like(t, dtype=bool)
    if which == "L21":
        h = s.aux["h"]
        if "a" not in params:
            raise ValueError("L21 needs the constant a in params")
        a = float(params["a"])
        if np.any(h < 0):
            ok = False
            notes.append("h takes negative values")
        if not _diff_ok(dz, h - a * z, zscale + np.abs(a * zl) + np.abs(h[:-1])):
            ok = False
            notes.append("z' + a z <= h fails at some sample")
        sup_h = _window_sup(s, h)
        b = pin("b", sup_h)
        sups = {"h": sup_h}
        bound = lemma21_bound(max(z[0], 0.0), a, max(b, 1e-300), s.tau)
    elif which == "L22":
        a, b = s.aux["a"], s.aux["b"]
        if np.any(a <= 0) or np.any(b <= 0) or np.any(z <= 0):
            ok = False
            notes.append("a, b and z must be positive")
        if not _diff_ok(dz, a * z + b, zscale + np.abs(a[:-1] * zl) + np.abs(b[:-1])):
            ok = False
            notes.append("z' <= a z + b fails at some sample")
        sups = {"a": _window_sup(s, a), "b": _window_sup(s, b), "z": _window_sup(s, z)}
        a1 = pin("a1", sups["a"])
        a2 = pin("a2", sups["b"])
        a3 = pin("a3", sups["z"])
        bound = lemma22_bound(max(a1, 0.0), max(a2, 0.0), max(a3, 0.0), s.tau)
        # the uniform Gronwall estimate controls z only one window after the start
        mask = t >= t[0] + s.tau * (1 - 1e-12)
    else:
        a, b, c = s.aux["a"], s.aux["b"], s.aux["c"]
        if np.any(a <= 0) or np.any(b < 0) or np.any(c < 0):
            ok = False
            notes.append("need a > 0, b >= 0, c >= 0")
        if not _diff_ok(dz, (b - a) * z + c,
                        zscale + np.abs(a[:-1] * zl) + np.abs(b[:-1] * zl) + np.abs(c[:-1])):
            ok = False
            notes.append("z' + a z <= b z + c fails at some sample")
        sups = {"b": _window_sup(s, b), "c": _window_sup(s, c), "a-b": _window_inf(s, a - b)}
        b1 = pin("b1", sups["b"])
        c1 = pin("c1", sups["c"])
        rho = pin("rho", sups["a-b"], upper=False)
        if not rho > 0:
            ok = False
            notes.append(f"window integrals of a - b reach {rho}, need > 0")
            bound = math.inf
        else:
            bound = lemma23_bound(max(z[0], 0.0), max(b1, 0.0), max(c1, 0.0), rho)
    zmax = float(z[mask].max())
    holds = zmax <= bound * (1 + CONCLUSION_SLACK)
    return Validation(which, ok, sups, bound, bool(holds), max(0.0, zmax - bound), notes)


# --- synthetic series satisfying the hypotheses -----------------------------

def synthetic(which: str, rng: np.random.Generator, n: int = 4001, t_end: float = 20.0,
              tau: float = 1.0) -> tuple[LemmaSeries, dict]:
    """Forward-integrated series obeying a lemma's differential inequality.

    The companion coefficients are random smooth positive signals; the
    inequality is made strict by subtracting a random nonnegative slack.
    """
    if which not in LEMMAS:
        raise ValueError(f"unknown lemma {which!r}")
    t = np.linspace(0.0, t_end, n)
    dt = np.diff(t)

    def signal(level, wiggle):
        k = rng.integers(1, 6, size=3)
        ph = rng.uniform(0, 2 * np.pi, size=3)
        amp = rng.uniform(0, 1, size=3)
        s = sum(amp[i] * np.sin(k[i] * t + ph[i]) for i in range(3)) / max(amp.sum(), 1e-12)
        return level * (1.0 + wiggle * s)

    slack = rng.uniform(0, 1, n) * rng.uniform(0, 0.5)
    z = np.empty(n)
    z[0] = rng.uniform(0.0, 5.0)
    params = {}
    if which == "L21":
        a = float(rng.uniform(0.2, 3.0))
        h = signal(rng.uniform(0.0, 3.0), rng.uniform(0, 1))
        for k in range(n - 1):
            z[k + 1] = z[k] + dt[k] * (-a * z[k] + h[k] - slack[k] * h[k])
        aux = {"h": h}
        params["a"] = a
    elif which == "L22":
        a = signal(rng.uniform(0.01, 0.3), rng.uniform(0, 0.9))
        b = signal(rng.uniform(0.1, 2.0), rng.uniform(0, 0.9))
        z[0] += 0.1
        # relax toward a bounded level so the window of z stays finite
        for k in range(n - 1):
            grow = a[k] * z[k] + b[k]
            z[k + 1] = z[k] + dt[k] * (grow - slack[k] * grow - (1.0 + a[k]) * z[k] * (z[k] > 2.0))
            z[k + 1] = max(z[k + 1], 1e-3)
        aux = {"a": a, "b": b}
        z = _repair_l22(z, a, b, dt)
    else:
        b = signal(rng.uniform(0.0, 1.0), rng.uniform(0, 0.9))
        a = b + signal(rng.uniform(0.2, 2.0), rng.uniform(0, 0.9))
        c = signal(rng.uniform(0.0, 2.0), rng.uniform(0, 0.9))
        for k in range(n - 1):
            z[k + 1] = z[k] + dt[k] * ((b[k] - a[k]) * z[k] + c[k] - slack[k] * c[k])
            z[k + 1] = max(z[k + 1], 0.0)
        aux = {"a": a, "b": b, "c": c}
    return LemmaSeries(t, z, aux, tau), params


def _repair_l22(z, a, b, dt):
    """Clip each forward difference to z' <= a z + b (the clamp above may exceed it)."""
    out = z.copy()
    for k in range(len(dt)):
        cap = out[k] + dt[k] * (a[k] * out[k] + b[k])
        if out[k + 1] > cap:
            out[k + 1] = cap
    return out


# --- replay of the energy argument on simulator monitors --------------------

def energy_replay(cols: dict, area: float, tau: float, b_weight: float = 1.0) -> tuple[LemmaSeries, float]:
    """Cast the monitored energy functional as a uniform Gronwall (L22) series.

    z = energy_F + 4 b |Omega| / e (nonnegative because x ln x >= -1/e),
    a = B * int u^2 with B the smallest constant making z' <= a z + b hold at
    every sample, and b = 1 + w4 + cross_uv + int u^2 + mass_v as a stand-in
    for the forcing collected in the energy estimate.
    Returns the series and the fitted B.
    """
    t = np.asarray(cols["t"], dtype=float)
    z = np.asarray(cols["energy_F"], dtype=float) + 4.0 * b_weight * area / math.e + 1e-12
    u2 = np.asarray(cols["norm_u_p2"], dtype=float) ** 2
    b = 1.0 + cols["w4"] + cols["cross_uv"] + u2 + cols["mass_v"]
    dz = np.diff(z) / np.diff(t)
    need = (dz - b[:-1]) / (u2[:-1] * z[:-1])
    B = max(float(need.max()) * (1 + 1e-6), 1e-12)
    a = B * u2
    keep = np.concatenate(([True], np.diff(t) > 0))
    return LemmaSeries(t[keep], z[keep], {"a": a[keep], "b": b[keep]}, tau), B
