"""Empirical checks of the functional inequalities behind the a-priori bounds.

Three static inequalities are evaluated on seeded families of smooth positive
fields, and one dynamic inequality on simulator trajectories:

* the W^{1,1} -> L^2 embedding  int rho^2 <= c1 (||grad rho||_1^2 + ||rho||_1^2);
* the two-field estimate for int phi^{p+1} psi (constant built from c1);
* the eta-weighted estimate for int phi^{p+1} psi |grad psi|^2 (constant fitted);
* d/dt G_q + gamma D_q <= (S_q)/gamma along (u, v) trajectories, with
  G_q = int v^{1-q}|grad v|^q, D_q = int v^{-q-1}|grad v|^{q+2},
  S_q = int u^{(q+2)/2} v + int v.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft

from .errors import DegenerateSample, NonpositiveField, RangeError
from .grid import Field, Grid2D, grad_sq, sum_cells

FAMILIES = ("trig", "bumps", "noise")


@dataclass(frozen=True)
class FieldFamily:
    kind: str = "trig"
    count: int = 100
    seed: int = 0
    floor: float = 1e-6
    modes: int = 4

    def __post_init__(self):
        if self.kind not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.kind!r}")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if not self.floor > 0:
            raise ValueError("floor must be positive")

    def fields(self, grid: Grid2D, count: int | None = None) -> list[Field]:
        """``count`` (default self.count) strictly positive band-limited fields."""
        rng = np.random.default_rng(self.seed)
        n = self.count if count is None else count
        make = {"trig": _trig, "bumps": _bumps, "noise": _noise}[self.kind]
        out = []
        for _ in range(n):
            a = make(grid, rng, self.modes)
            a = a - a.min() + self.floor + rng.uniform(0.0, 1.0)
            out.append(Field(grid, a))
        return out

    def pairs(self, grid: Grid2D) -> list[tuple[Field, Field]]:
        fs = self.fields(grid, 2 * self.count)
        return [(fs[2 * k], fs[2 * k + 1]) for k in range(self.count)]


def _trig(grid, rng, modes):
    X, Y = grid.centers()
    k = np.arange(modes + 1)
    cx = np.cos(np.outer(k, X[0]) * np.pi / grid.lx)       # (modes+1, nx)
    cy = np.cos(np.outer(k, Y[:, 0]) * np.pi / grid.ly)    # (modes+1, ny)
    kk = k[:, None] ** 2 + k[None, :] ** 2
    c = rng.normal(size=(modes + 1, modes + 1)) / (1.0 + kk)   # c[kx, ky]
    return cy.T @ c.T @ cx


def _bumps(grid, rng, modes):
    X, Y = grid.centers()
    a = np.zeros(grid.shape)
    for _ in range(int(rng.integers(1, 4))):
        cx, cy = rng.uniform(0, grid.lx), rng.uniform(0, grid.ly)
        s = rng.uniform(0.08, 0.3) * min(grid.lx, grid.ly)
        a += rng.uniform(0.1, 2.0) * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2 * s * s))
    return a


def _noise(grid, rng, modes):
    coef = fft.dctn(rng.normal(size=grid.shape), norm="ortho")
    ky, kx = np.indices(grid.shape)
    coef[(kx > modes) | (ky > modes)] = 0.0
    return fft.idctn(coef, norm="ortho")


@dataclass
class InequalityReport:
    name: str
    lhs: np.ndarray
    rhs: np.ndarray
    fitted_constant: float = math.nan
    specified: bool = True
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lhs = np.atleast_1d(np.asarray(self.lhs, dtype=float))
        self.rhs = np.atleast_1d(np.asarray(self.rhs, dtype=float))

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(self.rhs > 0, self.lhs / self.rhs, np.where(self.lhs > 0, np.inf, 0.0))
        return r

    @property
    def max_ratio(self) -> float:
        return float(self.ratio.max())

    @property
    def passed(self) -> bool:
        """For fully specified constants, every sample must satisfy lhs <= rhs."""
        if not self.specified:
            return True
        return self.max_ratio <= 1.0

    def line(self) -> str:
        parts = [self.name, f"n={self.lhs.size}", f"max_ratio={self.max_ratio:.17g}"]
        if not math.isnan(self.fitted_constant):
            parts.append(f"fitted={self.fitted_constant:.17g}")
        for k, v in self.extra.items():
            parts.append(f"{k}={v:.17g}" if isinstance(v, float) else f"{k}={v}")
        parts.append("pass" if self.passed else "fail")
        return " ".join(parts)


def _positive(f: Field, name: str):
    if not np.isfinite(f.values).all() or (f.values <= 0).any():
        k = int(np.argmin(np.where(np.isfinite(f.flat), f.flat, -np.inf)))
        raise NonpositiveField(f"{name} must be > 0; cell {k} holds {f.flat[k]!r}")


# --- W^{1,1} -> L^2 embedding ---------------------------------------------------

def sobolev_ratio(rho: Field) -> float:
    g = rho.grid
    num = sum_cells(rho.values ** 2, g)
    grad_l1 = sum_cells(np.sqrt(grad_sq(rho.values, g)), g)
    l1 = sum_cells(np.abs(rho.values), g)
    den = grad_l1 ** 2 + l1 ** 2
    if not den > 1e-300:
        raise DegenerateSample("denominator ||grad rho||_1^2 + ||rho||_1^2 underflows")
    return num / den


def estimate_sobolev_c1(family: FieldFamily | list, grid: Grid2D | None = None) -> float:
    """Largest embedding ratio over the family: a lower estimate of c1."""
    fields = family.fields(grid) if isinstance(family, FieldFamily) else list(family)
    if not fields:
        raise ValueError("family is empty")
    return max(sobolev_ratio(f) for f in fields)


# --- two-field estimates ----------------------------------------------------

def lemma41_constant(p: float, c1: float, area: float) -> float:
    q = (p + 1.0) ** 2 * c1 / 2.0
    return max(q, q * area, c1)


def lemma41_terms(phi: Field, psi: Field, p: float) -> dict:
    _positive(phi, "phi")
    _positive(psi, "psi")
    g = phi.grid
    f, s = phi.values, psi.values
    gf = grad_sq(f, g)
    gs = grad_sq(s, g)
    return {
        "lhs": sum_cells(f ** (p + 1) * s, g),
        "psi_grad_phi": sum_cells(s * gf, g),
        "ratio_grad_psi": sum_cells(f / s * gs, g),
        "phi_psi": sum_cells(f * s, g),
        "phi_p": sum_cells(f ** p, g),
    }


def check_lemma41(phi: Field, psi: Field, p: float, c1: float) -> InequalityReport:
    if not p >= 1:
        raise ValueError("p must be >= 1")
    t = lemma41_terms(phi, psi, p)
    c = lemma41_constant(p, c1, phi.grid.area)
    rhs = c * (t["psi_grad_phi"] + t["ratio_grad_psi"] + t["phi_psi"]) * t["phi_p"] + c * t["psi_grad_phi"]
    return InequalityReport("l41", t["lhs"], rhs, extra={"c": c})


def lemma42_terms(phi: Field, psi: Field, p: float, eta: float) -> dict:
    """lhs, the eta term, and the bracket R multiplying the constant c."""
    _positive(phi, "phi")
    _positive(psi, "psi")
    if not eta > 0:
        raise ValueError("eta must be positive")
    g = phi.grid
    f, s = phi.values, psi.values
    gf = grad_sq(f, g)
    gs = grad_sq(s, g)
    smax = float(s.max())
    w4 = sum_cells(gs * gs / s ** 3, g)
    lhs = sum_cells(f ** (p + 1) * s * gs, g)
    eta_term = eta * sum_cells(f ** (p - 1) * s * gf, g)
    bracket = ((smax + smax ** 3 / eta) * sum_cells(f ** (p + 1) * s, g) * w4
               + smax ** 2 * sum_cells(f, g) ** (2 * p + 1) * w4
               + smax ** 2 * sum_cells(f * s, g))
    return {"lhs": lhs, "eta_term": eta_term, "bracket": bracket}


def check_lemma42(phi: Field, psi: Field, p: float, eta: float, c: float | None = None) -> InequalityReport:
    """With ``c`` given, compare lhs to the full rhs; otherwise fit the minimal c."""
    t = lemma42_terms(phi, psi, p, eta)
    fitted = max(0.0, (t["lhs"] - t["eta_term"]) / t["bracket"])
    cc = fitted if c is None else float(c)
    rhs = t["eta_term"] + cc * t["bracket"]
    return InequalityReport("l42", t["lhs"], rhs, fitted_constant=fitted, specified=c is not None)


def family_lemma41(family: FieldFamily, grid: Grid2D, p: float, c1: float) -> InequalityReport:
    lhs, rhs = [], []
    for phi, psi in family.pairs(grid):
        r = check_lemma41(phi, psi, p, c1)
        lhs.append(r.lhs[0])
        rhs.append(r.rhs[0])
    return InequalityReport("l41", lhs, rhs, extra={"c": lemma41_constant(p, c1, grid.area)})


def fit_lemma42(family: FieldFamily, grid: Grid2D, p: float, eta: float) -> InequalityReport:
    """Minimal c over the family; lhs/rhs evaluated at that constant."""
    terms = [lemma42_terms(phi, psi, p, eta) for phi, psi in family.pairs(grid)]
    c = max(max(0.0, (t["lhs"] - t["eta_term"]) / t["bracket"]) for t in terms)
    lhs = [t["lhs"] for t in terms]
    rhs = [t["eta_term"] + c * t["bracket"] for t in terms]
    return InequalityReport("l42", lhs, rhs, fitted_constant=c, specified=False, extra={"eta": eta})


# --- weighted gradient inequality along trajectories -------------------------

def gamma_struct(q: float) -> float:
    """A quarter of the coefficient q / (2 (q + sqrt 2)^2) in the proof."""
    return q / (8.0 * (q + math.sqrt(2.0)) ** 2)


def lemma52_terms(u: np.ndarray, v: np.ndarray, grid: Grid2D, q: float) -> tuple[float, float, float]:
    if (v <= 0).any():
        raise NonpositiveField("v must be > 0")
    g2 = grad_sq(v, grid)
    G = sum_cells(g2 ** (q / 2) / v ** (q - 1), grid)
    D = sum_cells(g2 ** (q / 2 + 1) / v ** (q + 1), grid)
    S = sum_cells(u ** ((q + 2) / 2) * v, grid) + sum_cells(v, grid)
    return G, D, S


def _gamma_at(dG: float, D: float, S: float) -> float:
    """Largest gamma with dG + gamma D <= S / gamma."""
    if D > 0:
        return (-dG + math.sqrt(dG * dG + 4.0 * D * S)) / (2.0 * D)
    if dG <= 0:
        return math.inf
    return math.sqrt(S / dG)


def check_lemma52_trajectory(snapshots, grid: Grid2D, q: int) -> InequalityReport:
    """Empirical gamma(q) along a trajectory of (t, u, v) snapshots.

    The time derivative of G_q at snapshot k is the central difference over
    snapshots k-1 and k+1; D_q and S_q are taken at snapshot k. The report's
    fitted_constant is the smallest admissible gamma over all such triples
    (+inf when every triple holds for every gamma).
    """
    if q < 2 or int(q) != q or q % 2:
        raise ValueError(f"q must be an even integer >= 2, got {q}")
    snaps = list(snapshots)
    if len(snaps) < 10:
        raise RangeError(f"need at least 10 snapshots, got {len(snaps)}")
    ts = np.array([float(s.t) for s in snaps])
    terms = [lemma52_terms(np.asarray(s.u, float).reshape(grid.shape),
                           np.asarray(s.v, float).reshape(grid.shape), grid, q) for s in snaps]
    G = np.array([x[0] for x in terms])
    dG = np.array([(G[k + 1] - G[k - 1]) / (ts[k + 1] - ts[k - 1]) for k in range(1, len(snaps) - 1)])
    D = np.array([x[1] for x in terms[1:-1]])
    S = np.array([x[2] for x in terms[1:-1]])
    gmin = float(min(_gamma_at(a, b, c) for a, b, c in zip(dG, D, S)))
    if math.isfinite(gmin) and gmin > 0:
        lhs, rhs = dG + gmin * D, S / gmin
    else:
        lhs, rhs = dG, S
    return InequalityReport(f"l52_q{int(q)}", lhs, rhs, fitted_constant=gmin,
                            specified=False, extra={"gamma_struct": gamma_struct(q)})
