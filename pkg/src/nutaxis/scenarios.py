"""Initial-data presets, scenario config files and the epsilon sweep."""
from __future__ import annotations

import ast
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import fft

from .errors import BadScenario
from .grid import Field, Grid2D
from .model import ModelParams, State
from .monitors import MonitorConfig, columns
from .stepper import RunConfig, RunResult, StepControl, run

log = logging.getLogger(__name__)

DELTA_V = 1e-3
SWEEP_MONITORS = ("sup_u", "entropy", "w4", "w6", "sup_grad_v")


# --- presets: each returns (u, v) arrays on the grid -------------------------

def _uniform(grid, u, v=1.0):
    return np.full(grid.shape, float(u)), np.full(grid.shape, float(v))


def _gaussian(grid, amp, cx=0.5, cy=0.5, sigma=0.1, vconst=1.0):
    if not sigma > 0:
        raise BadScenario("gaussian: sigma must be positive")
    X, Y = grid.centers()
    u = amp * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2.0 * sigma * sigma))
    return u, np.full(grid.shape, float(vconst))


def _two_bumps(grid, amp1=3.0, amp2=3.0, x1=0.3, y1=0.3, x2=0.7, y2=0.7, sigma=0.08, vconst=1.0):
    ua, v = _gaussian(grid, amp1, x1, y1, sigma, vconst)
    ub, _ = _gaussian(grid, amp2, x2, y2, sigma, vconst)
    return ua + ub, v


def _smooth_noise(grid, rng, modes=4):
    coef = fft.dctn(rng.normal(size=grid.shape), norm="ortho")
    ky, kx = np.indices(grid.shape)
    coef[(kx > modes) | (ky > modes) | ((kx == 0) & (ky == 0))] = 0.0
    n = fft.idctn(coef, norm="ortho")
    m = np.abs(n).max()
    return n / m if m > 0 else n


def _random_perturbation(grid, seed=0, amp=0.1, ubase=1.0, vconst=1.0):
    rng = np.random.default_rng(int(seed))
    u = ubase * (1.0 + amp * _smooth_noise(grid, rng))
    return u, np.full(grid.shape, float(vconst))


def _heat_only(grid, mode=1, amp=0.1):
    X, _ = grid.centers()
    v = 1.0 + amp * np.cos(int(mode) * math.pi * X / grid.lx)
    return np.zeros(grid.shape), v


PRESETS = {
    "uniform": _uniform,
    "gaussian": _gaussian,
    "two_bumps": _two_bumps,
    "random_perturbation": _random_perturbation,
    "heat_only": _heat_only,
}
# verification presets that deliberately start from u = 0
VACUUM_PRESETS = {"heat_only"}


def _number(node):
    val = ast.literal_eval(node)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise BadScenario(f"preset arguments must be numbers, got {ast.unparse(node)!r}")
    return val


def parse_preset(expr: str) -> tuple[str, list, dict]:
    """``"gaussian(5, sigma=0.1)"`` -> ("gaussian", [5], {"sigma": 0.1})."""
    try:
        tree = ast.parse(expr.strip(), mode="eval").body
    except SyntaxError as e:
        raise BadScenario(f"cannot parse preset {expr!r}: {e.msg}") from None
    if isinstance(tree, ast.Name):
        name, args, kwargs = tree.id, [], {}
    elif isinstance(tree, ast.Call) and isinstance(tree.func, ast.Name):
        name = tree.func.id
        try:
            args = [_number(a) for a in tree.args]
            kwargs = {k.arg: _number(k.value) for k in tree.keywords}
        except (ValueError, SyntaxError):
            raise BadScenario(f"preset arguments in {expr!r} must be numeric literals") from None
    else:
        raise BadScenario(f"not a preset expression: {expr!r}")
    if name not in PRESETS:
        raise BadScenario(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")
    return name, args, kwargs


def evaluate_preset(expr: str, grid: Grid2D, seed: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    name, args, kwargs = parse_preset(expr)
    if name == "random_perturbation" and not args and "seed" not in kwargs and seed is not None:
        kwargs["seed"] = seed
    try:
        return PRESETS[name](grid, *args, **kwargs)
    except TypeError as e:
        raise BadScenario(f"{expr}: {e}") from None


# --- scenario ---------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    grid: Grid2D = field(default_factory=lambda: Grid2D(64, 64))
    u0: str = "uniform(1, 1)"
    v0: str | None = None
    params: ModelParams = ModelParams()
    control: StepControl = StepControl()
    run: RunConfig = field(default_factory=lambda: RunConfig(t_end=1.0))
    seed: int = 0
    outdir: str | None = None

    def with_epsilon(self, eps: float) -> "Scenario":
        return replace(self, params=replace(self.params, epsilon=eps))


def initial_fields(sc: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """u0 (before the epsilon shift) and v0 as arrays."""
    u, v_from_u = evaluate_preset(sc.u0, sc.grid, sc.seed)
    v = v_from_u if sc.v0 is None else evaluate_preset(sc.v0, sc.grid, sc.seed)[1]
    return u, v


def build(sc: Scenario) -> tuple[State, ModelParams, StepControl, RunConfig]:
    """Initial state with u0 + epsilon, checked against the admissibility rules."""
    u, v = initial_fields(sc)
    if not (np.isfinite(u).all() and np.isfinite(v).all()):
        raise BadScenario("initial data must be finite")
    u = u + sc.params.epsilon
    if (u < 0).any():
        raise BadScenario(f"u0 >= 0 violated: min u0 = {u.min()!r}")
    vacuum_ok = parse_preset(sc.u0)[0] in VACUUM_PRESETS
    if not (u > 0).any() and not vacuum_ok:
        raise BadScenario("u0 not identically zero violated: u0 + epsilon vanishes everywhere")
    if v.min() < DELTA_V:
        raise BadScenario(f"v0 >= {DELTA_V} violated: min v0 = {v.min()!r}")
    g = sc.grid
    return State(Field(g, u), Field(g, v), 0.0), sc.params, sc.control, sc.run


# --- config files -----------------------------------------------------------

CONFIG_KEYS = ("name", "nx", "ny", "lx", "ly", "epsilon", "rho", "mu", "kappa", "cfl",
               "dt_max", "scheme", "t_end", "snapshot_every", "monitor_every",
               "window_tau", "u0", "v0", "seed", "outdir")


def parse_config(text: str, source: str = "<config>") -> dict:
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BadScenario(f"{source}:{n}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise BadScenario(f"{source}:{n}: unknown key {key!r}")
        if key in out:
            raise BadScenario(f"{source}:{n}: duplicate key {key!r}")
        out[key] = val
    return out


def scenario_from_dict(cfg: dict, source: str = "<config>") -> Scenario:
    def get(key, conv, default):
        if key not in cfg:
            return default
        try:
            return conv(cfg[key])
        except ValueError:
            raise BadScenario(f"{source}: bad value for {key}: {cfg[key]!r}") from None

    def integer(s):
        f = float(s)
        if f != int(f):
            raise ValueError(s)
        return int(f)

    try:
        grid = Grid2D(get("nx", integer, 64), get("ny", integer, 64),
                      get("lx", float, 1.0), get("ly", float, 1.0))
        params = ModelParams(get("epsilon", float, 0.0), get("rho", float, 1.0),
                             get("mu", float, 1.0), get("kappa", float, 2.0))
        ctl = StepControl(cfl=get("cfl", float, 0.4), dt_max=get("dt_max", float, 1e-2),
                          scheme=get("scheme", str, "euler"))
        t_end = get("t_end", float, 1.0)
        rc = RunConfig(t_end, get("snapshot_every", float, 1.0),
                       get("monitor_every", integer, 100), get("window_tau", float, None))
    except BadScenario:
        raise
    except ValueError as e:
        raise BadScenario(f"{source}: {e}") from None
    if "u0" not in cfg:
        raise BadScenario(f"{source}: missing required key 'u0'")
    sc = Scenario(name=cfg.get("name", Path(source).stem), grid=grid, u0=cfg["u0"],
                  v0=cfg.get("v0"), params=params, control=ctl, run=rc,
                  seed=get("seed", integer, 0), outdir=cfg.get("outdir"))
    parse_preset(sc.u0)
    if sc.v0 is not None:
        parse_preset(sc.v0)
    return sc


def load_scenario(path) -> Scenario:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file not found: {p}")
    return scenario_from_dict(parse_config(p.read_text(encoding="utf-8"), str(p)), str(p))


def reference_scenario(epsilon: float = 1e-3, n: int = 128, t_end: float = 50.0,
                       cfl: float = 0.8, monitor_every: int = 1000,
                       snapshot_every: float = 1.0) -> Scenario:
    """Gaussian bump (amp 5, sigma 0.1) in a uniform nutrient bath."""
    return Scenario(
        name="reference", grid=Grid2D(n, n), u0="gaussian(5, 0.5, 0.5, 0.1, 1)",
        params=ModelParams(epsilon=epsilon), control=StepControl(cfl=cfl),
        run=RunConfig(t_end, snapshot_every, monitor_every, min(1.0, t_end / 2)))


# --- epsilon sweep ----------------------------------------------------------

@dataclass
class SweepReport:
    eps: list
    reasons: dict
    suprema: dict            # eps -> {monitor: sup_t value}
    ratios: dict             # monitor -> max/min over eps
    series: dict = field(default_factory=dict)   # eps -> column dict

    @property
    def completed(self) -> bool:
        return all(r == "completed" for r in self.reasons.values())

    def lines(self) -> list[str]:
        out = [f"eps={e:g} reason={self.reasons[e]} "
               + " ".join(f"{k}={v:.17g}" for k, v in self.suprema[e].items()) for e in self.eps]
        out += [f"ratio {k} {v:.17g}" for k, v in self.ratios.items()]
        return out


def sweep_ratios(suprema: dict) -> dict:
    ratios = {}
    for k in SWEEP_MONITORS:
        vals = [s[k] for s in suprema.values()]
        lo, hi = min(vals), max(vals)
        if lo == hi:
            ratios[k] = 1.0
        elif lo > 0:
            ratios[k] = hi / lo
        else:
            ratios[k] = math.inf   # sign change or vanishing supremum: no meaningful ratio
    return ratios


def epsilon_sweep(sc: Scenario, eps_list, sinks_for=None, runner=run) -> SweepReport:
    """Run ``sc`` once per epsilon and compare the suprema of key monitors."""
    eps_list = sorted(float(e) for e in eps_list)
    if not eps_list:
        raise ValueError("eps_list must be nonempty")
    if any(not 0 < e < 1 for e in eps_list):
        raise ValueError("every epsilon must lie in (0, 1)")
    reasons, suprema, series = {}, {}, {}
    for e in eps_list:
        s0, p, c, r = build(sc.with_epsilon(e))
        sinks = sinks_for(e) if sinks_for else ()
        res: RunResult = runner(s0, p, c, r, sinks, MonitorConfig(window_tau=r.window_tau))
        if not res.completed:
            log.warning("eps=%g: run ended with %s", e, res.reason)
        cols = columns(res.series)
        reasons[e] = res.reason
        suprema[e] = {k: float(np.max(cols[k])) for k in SWEEP_MONITORS}
        series[e] = cols
    return SweepReport(eps_list, reasons, suprema, sweep_ratios(suprema), series)
