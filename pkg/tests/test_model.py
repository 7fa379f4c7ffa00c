import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nutaxis.errors import PositivityViolation
from nutaxis.grid import Field, Grid2D, divergence, integrate
from nutaxis.model import ModelParams, State, flux_u, rhs_u, rhs_v
from nutaxis.stepper import StepControl, stable_dt, step

from conftest import random_state
from oracle import face_flux_1d, rhs_loops


def state(g, u, v):
    return State(Field(g, u), Field(g, v))


def test_params_validation():
    ModelParams(0.5, 2.0, 0.5, 3.5)
    for kw in ({"epsilon": -1e-3}, {"epsilon": 1.0}, {"rho": 0}, {"mu": -1}, {"kappa": 1.5}):
        with pytest.raises(ValueError):
            ModelParams(**kw)


def test_state_validation():
    g = Grid2D(2, 2)
    with pytest.raises(PositivityViolation) as e:
        state(g, [1, 1, -1e-300, 1], [1, 1, 1, 1]).validate()
    assert e.value.field == "u" and e.value.index == 2
    with pytest.raises(PositivityViolation) as e:
        flux_u(state(g, [1, 1, 1, 1], [1, 0, 1, 1]))
    assert e.value.field == "v" and e.value.index == 1
    with pytest.raises(ValueError):
        State(Field(g, np.ones(4)), Field(Grid2D(4, 1 + 1), np.ones(8)))


def test_flux_examples():
    g = Grid2D(5, 4)
    fx, fy = flux_u(state(g, np.full(g.shape, 2.0), np.full(g.shape, 0.3)))
    assert not fx.any() and not fy.any()
    rng = np.random.default_rng(1)
    fx, fy = flux_u(state(g, np.zeros(g.shape), rng.uniform(0.1, 2, g.shape)))
    assert not fx.any() and not fy.any()
    # two cells, hx = 1: diffusion 1.5*2*1 = 3, donor taxis -1^2*2*2 = -4
    g2 = Grid2D(2, 2, 2.0, 2.0)
    fx, fy = flux_u(state(g2, [1, 2, 1, 2], [1, 3, 1, 3]))
    assert fx[0, 1] == -1.0 and fx[1, 1] == -1.0
    assert not fx[:, [0, 2]].any() and not fy.any()


def test_rhs_examples():
    g = Grid2D(6, 6)
    v = np.full(g.shape, 0.7)
    assert not rhs_u(state(g, np.zeros(g.shape), v)).values.any()
    assert np.array_equal(rhs_u(state(g, np.ones(g.shape), v)).values, np.zeros(g.shape))
    assert np.array_equal(rhs_u(state(g, np.full(g.shape, 2.0), v)).values, np.full(g.shape, -2.0))
    assert not rhs_v(state(g, np.zeros(g.shape), v)).values.any()
    assert np.array_equal(rhs_v(state(g, np.ones(g.shape), np.full(g.shape, 2.0))).values,
                          np.full(g.shape, -2.0))


def test_rhs_v_laplacian_second_order():
    errs = []
    for n in (16, 32, 64):
        g = Grid2D(n, n)
        vf = g.sample(lambda x, y: 2.0 + np.cos(np.pi * x))
        exact = -np.pi ** 2 * np.cos(np.pi * g.centers()[0])
        err = rhs_v(State(g.constant(0.0), vf)).values - exact
        # boundary cells see a first-order one-sided stencil; measure the interior
        errs.append(np.abs(err[:, 1:-1]).max())
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


@given(st.integers(0, 10**6), st.sampled_from([2.0, 2.5, 3.0, 4.0]))
def test_rhs_matches_loop_oracle(seed, kappa):
    rng = np.random.default_rng(seed)
    s = random_state(rng, nx=int(rng.integers(2, 8)), ny=int(rng.integers(2, 8)))
    p = ModelParams(0.0, float(rng.uniform(0.5, 2)), float(rng.uniform(0.5, 2)), kappa)
    ru, rv = rhs_loops(s.u.values, s.v.values, s.grid.hx, s.grid.hy, p.rho, p.mu, p.kappa)
    assert np.allclose(rhs_u(s, p).values, ru, rtol=1e-12, atol=1e-10)
    assert np.allclose(rhs_v(s).values, rv, rtol=1e-12, atol=1e-10)


@given(st.integers(0, 10**6))
def test_conservative_parts_integrate_to_zero(seed):
    rng = np.random.default_rng(seed)
    s = random_state(rng)
    g = s.grid
    fx, fy = flux_u(s)
    div = divergence(fx, fy, g)
    scale = (np.abs(fx).sum() + np.abs(fy).sum()) * g.hx * g.hy / g.h + 1.0
    assert abs(integrate(Field(g, div))) <= 1e-14 * scale
    lap = rhs_v(s).values + s.u.values * s.v.values
    assert abs(integrate(Field(g, lap))) <= 1e-13 * (np.abs(lap).sum() * g.hx * g.hy + 1.0)
    src = ModelParams().source(s.u.values)
    assert np.allclose(rhs_u(s).values - src, div, rtol=0, atol=1e-12 * (1 + np.abs(div).max()))


@given(st.integers(0, 10**6))
def test_mirror_symmetry(seed):
    rng = np.random.default_rng(seed)
    s = random_state(rng, nx=7, ny=6, lx=1.0, ly=1.0)
    g = s.grid
    ru, rv = rhs_u(s).values, rhs_v(s).values
    for axis in (0, 1):
        m = state(g, np.flip(s.u.values, axis), np.flip(s.v.values, axis))
        assert np.array_equal(rhs_u(m).values, np.flip(ru, axis))
        assert np.array_equal(rhs_v(m).values, np.flip(rv, axis))


@given(st.integers(0, 10**6))
def test_double_degeneracy(seed):
    rng = np.random.default_rng(seed)
    g = Grid2D(8, 8)
    u = rng.uniform(0, 2, g.shape)
    u[2:6, 2:6] = 0.0
    v = rng.uniform(0.1, 2, g.shape)
    fx, fy = flux_u(state(g, u, v))
    # cells (3..4, 3..4) and their neighbours are empty: their faces carry nothing
    assert not fx[3:5, 3:6].any() and not fy[3:6, 3:5].any()
    # v clamped to tiny positive values annihilates the flux as well
    fx, fy = flux_u(state(g, u, np.full(g.shape, 1e-300) * rng.uniform(1, 2, g.shape)))
    assert np.abs(fx).max() < 1e-290 and np.abs(fy).max() < 1e-290


@given(st.integers(0, 10**6))
def test_rhs_v_consumption(seed):
    rng = np.random.default_rng(seed)
    g = Grid2D(6, 5)
    u = rng.uniform(0.01, 2, g.shape)
    r = rhs_v(state(g, u, np.full(g.shape, float(rng.uniform(0.1, 3))))).values
    assert (r < 0).all()


# --- donor-cell convention: 1D positivity stress ---------------------------

def _step_1d(u, v, h, dt, donor):
    n = u.size
    flux = np.zeros(n + 1)
    for k in range(1, n):
        flux[k] = face_flux_1d(u[k - 1], u[k], v[k - 1], v[k], h, donor)
    return u + dt * (flux[1:] - flux[:-1]) / h


def test_centered_taxis_breaks_positivity():
    # empty cell next to a dense one, steep nutrient rise: any dt > 0 drains the empty cell
    u = np.array([0.0, 4.0, 4.0])
    v = np.array([0.1, 3.0, 3.0])
    assert _step_1d(u, v, 1.0, 1e-3, donor=False)[0] < 0
    assert _step_1d(u, v, 1.0, 1e-3, donor=True)[0] >= 0


def test_donor_cell_positivity_stress():
    rng = np.random.default_rng(7)
    for trial in range(200):
        n = int(rng.integers(4, 24))
        g = Grid2D(n, 2, 1.0, 2.0 / n)
        row_u = rng.uniform(0, 5, n) * (rng.uniform(size=n) > 0.4)
        row_v = rng.uniform(0.01, 3, n)
        s = state(g, np.tile(row_u, (2, 1)), np.tile(row_v, (2, 1)))
        dt = stable_dt(s, ModelParams(), StepControl(cfl=1.0, dt_max=1.0))
        nxt = step(s, dt, ModelParams(), StepControl(cfl=1.0, dt_max=1.0))
        assert (nxt.u.values >= 0).all() and (nxt.v.values > 0).all()
        ref = _step_1d(row_u, row_v, g.hx, dt, donor=True) + dt * (row_u - row_u ** 2)
        assert np.allclose(nxt.u.values[0], ref, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("cfl", [0.4, 1.0])
def test_positivity_stress_2d(cfl):
    rng = np.random.default_rng(11)
    c = StepControl(cfl=cfl, dt_max=1.0)
    for trial in range(300):
        g = Grid2D(int(rng.integers(3, 12)), int(rng.integers(3, 12)))
        u = rng.uniform(0, 5, g.shape) * (rng.uniform(size=g.shape) > 0.4)
        s = state(g, u, rng.uniform(0.01, 3, g.shape))
        nxt = step(s, stable_dt(s, ModelParams(), c), ModelParams(), c)
        assert (nxt.u.values >= 0).all() and (nxt.v.values > 0).all()


def test_separate_limits_alone_do_not_protect_positivity():
    # one occupied cell in a nutrient trough: diffusion and drift limits tie, and
    # their drains add up to 3 * cfl of the cell content
    g = Grid2D(3, 3)
    u = np.zeros(g.shape)
    u[1, 1] = 1.0
    v = np.full(g.shape, 3.0)
    v[1, 1] = 2.0
    s = state(g, u, v)
    h = g.h
    d, w = 0.5 * 2.5, 1.0 * 2.5 / h
    separate = 0.4 * min(h * h / 4, h * h / (4 * d), 1 / 3, h / (2 * w))
    ru = rhs_u(s).values
    assert u[1, 1] + separate * ru[1, 1] == pytest.approx(-0.2, rel=1e-12)
    dt = stable_dt(s, ModelParams(), StepControl())
    assert dt < separate
    assert step(s, dt).u.values.min() >= 0
