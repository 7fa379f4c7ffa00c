import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nutaxis.errors import RangeError
from nutaxis.grid import Field, Grid2D, write_field
from nutaxis.model import ModelParams, State
from nutaxis.stepper import RunConfig, Snapshot, SnapshotStore, SnapshotWriter, StepControl, run
from nutaxis.weakform import (TestFunction, load_snapshots, parse_modes, residual_u, residual_v,
                              sides_u, sides_v)


def trajectory(grid, ts, u, v):
    return [Snapshot(k, float(t), u(t), v(t)) for k, t in enumerate(ts)]


def test_test_function_validation():
    with pytest.raises(ValueError):
        TestFunction(-1, 0, 1.0)
    with pytest.raises(ValueError):
        TestFunction(1, 0, 1.0, w=1.0)
    assert TestFunction(0, 0, 2.0).w == pytest.approx(0.2)


def test_eta_shape():
    tf = TestFunction(0, 0, 1.0, 0.3)
    assert tf.eta(0.0) == 1.0 and tf.eta(0.7) == 1.0
    assert tf.eta(1.0) == 0.0 and tf.eta(5.0) == 0.0
    assert tf.eta(0.85) == pytest.approx(0.5, abs=1e-15)   # symmetric joining
    ts = np.linspace(0.7, 1.0, 301)
    vals = np.array([tf.eta(t) for t in ts])
    assert np.all(np.diff(vals) <= 0) and 0 < vals[100] < 1 and 0 < vals[200] < 1
    # flat joins: the first differences vanish faster than any power near the ends
    assert 1.0 - tf.eta(0.7 + 1e-3) < 1e-30 and tf.eta(1.0 - 1e-3) < 1e-30


@pytest.mark.parametrize("kx,ky", [(0, 0), (1, 0), (2, 3)])
def test_space_gradient_and_neumann(kx, ky):
    g = Grid2D(40, 30, 2.0, 1.5)
    X, Xx, Xy = TestFunction(kx, ky, 1.0).space(g)
    xc, yc = g.centers()
    ax, ay = kx * math.pi / g.lx, ky * math.pi / g.ly
    d = 1e-6

    def phi(x, y):
        return np.cos(ax * x) * np.cos(ay * y)
    assert np.allclose(X, phi(xc, yc), rtol=0, atol=1e-15)
    assert np.allclose(Xx, (phi(xc + d, yc) - phi(xc - d, yc)) / (2 * d), rtol=0, atol=1e-7)
    assert np.allclose(Xy, (phi(xc, yc + d) - phi(xc, yc - d)) / (2 * d), rtol=0, atol=1e-7)
    # zero normal derivative on the boundary
    for x in (0.0, g.lx):
        assert abs((phi(x + d, 0.3) - phi(x - d, 0.3)) / (2 * d)) < 1e-9


@pytest.mark.parametrize("mode", [(0, 0), (1, 0), (2, 1), (3, 3)])
def test_trivial_trajectories_have_zero_residual(mode):
    g = Grid2D(16, 12)
    ts = np.linspace(0, 1, 21)
    tf = TestFunction(*mode, 0.8)
    zero = trajectory(g, ts, lambda t: np.zeros(g.shape), lambda t: np.full(g.shape, 0.7))
    assert residual_u(zero, g, tf) <= 1e-14
    assert residual_v(zero, g, tf) <= 1e-14


def test_window_errors():
    g = Grid2D(4, 4)
    mk = lambda ts: trajectory(g, ts, lambda t: np.zeros(g.shape), lambda t: np.ones(g.shape))
    tf = TestFunction(0, 0, 1.0)
    with pytest.raises(RangeError):
        residual_u(mk([0.0]), g, tf)
    with pytest.raises(RangeError):
        residual_u(mk([0.1, 0.5, 1.2]), g, tf)
    with pytest.raises(RangeError):
        residual_v(mk([0.0, 0.5, 0.9]), g, tf)


def _logistic_run(dt, spacing):
    g = Grid2D(4, 4)
    s0 = State(g.constant(0.3), g.constant(1.0))
    store = SnapshotStore()
    run(s0, ModelParams(), StepControl(scheme="heun", dt_max=dt), RunConfig(1.0, spacing, 10**6), [store])
    return g, store.snapshots


def test_uniform_logistic_residual_shrinks_under_refinement():
    tf = TestFunction(0, 0, 0.9)
    g, coarse = _logistic_run(1e-2, 0.05)
    _, fine = _logistic_run(1e-3, 0.005)
    rc, rf = residual_u(coarse, g, tf), residual_u(fine, g, tf)
    assert rc < 1e-2 and rf < rc / 10
    assert residual_v(fine, g, tf) < residual_v(coarse, g, tf) / 10


def test_analytic_heat_mode():
    # v = 1 + 0.1 e^{-pi^2 t} cos(pi x) solves v_t = lap v with u = 0
    tf = TestFunction(1, 0, 0.2)
    res = []
    for n in (16, 32, 64):
        g = Grid2D(n, n)
        X, _ = g.centers()
        ts = np.linspace(0, 0.2, 2 * n + 1)
        snaps = trajectory(g, ts, lambda t: np.zeros(g.shape),
                           lambda t: 1 + 0.1 * math.exp(-math.pi ** 2 * t) * np.cos(math.pi * X))
        res.append(residual_v(snaps, g, tf))
        assert residual_u(snaps, g, tf) == 0.0
    assert res[0] / res[1] > 3.5 and res[1] / res[2] > 3.5


def _random_trajectory(seed):
    rng = np.random.default_rng(seed)
    g = Grid2D(12, 10)
    u0 = rng.uniform(0, 0.1, g.shape)
    v0 = rng.uniform(0.5, 0.6, g.shape)
    du = rng.normal(size=g.shape) * 0.01
    ts = np.linspace(0, 1, 11)
    return g, trajectory(g, ts, lambda t: u0 + t * np.abs(du), lambda t: v0 * math.exp(-0.1 * t))


@given(st.integers(0, 10**6), st.integers(0, 3), st.integers(0, 3), st.integers(0, 3),
       st.integers(0, 3), st.floats(-2, 2), st.floats(-2, 2))
def test_residuals_linear_in_test_function(seed, a1, b1, a2, b2, c1, c2):
    g, snaps = _random_trajectory(seed)
    f1, f2 = TestFunction(a1, b1, 0.8), TestFunction(a2, b2, 0.9)
    combo = [(c1, f1), (c2, f2)]
    for sides in (sides_u, sides_v):
        l1, r1 = sides(snaps, g, f1)
        l2, r2 = sides(snaps, g, f2)
        lc, rc = sides(snaps, g, combo)
        assert lc == pytest.approx(c1 * l1 + c2 * l2, rel=1e-12, abs=1e-14)
        assert rc == pytest.approx(c1 * r1 + c2 * r2, rel=1e-12, abs=1e-14)
        assert abs(lc - rc) <= abs(c1) * abs(l1 - r1) + abs(c2) * abs(l2 - r2) + 1e-14


def test_load_snapshots(tmp_path):
    g = Grid2D(6, 5)
    rng = np.random.default_rng(0)
    s0 = State(Field(g, rng.uniform(0, 1, g.shape)), Field(g, rng.uniform(0.5, 1, g.shape)))
    store = SnapshotStore()
    run(s0, ModelParams(), StepControl(), RunConfig(0.02, 0.005, 10), [store, SnapshotWriter(tmp_path)])
    grid, snaps = load_snapshots(tmp_path)
    assert grid == g and [s.step for s in snaps] == [s.step for s in store.snapshots]
    for a, b in zip(snaps, store.snapshots):
        assert a.t == b.t and np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)
    with pytest.raises(FileNotFoundError):
        load_snapshots(tmp_path / "nope")
    (tmp_path / "empty").mkdir()
    with pytest.raises(RangeError):
        load_snapshots(tmp_path / "empty")
    write_field(tmp_path / "u_99999999.fld", Grid2D(3, 3).constant(1.0), 1.0)
    write_field(tmp_path / "v_99999999.fld", Grid2D(3, 3).constant(1.0), 1.0)
    with pytest.raises(RangeError):
        load_snapshots(tmp_path)


def test_parse_modes():
    assert parse_modes("1,0;1,1") == [(1, 0), (1, 1)]
    assert parse_modes(" 2,0 ; ") == [(2, 0)]
    with pytest.raises(ValueError):
        parse_modes(";")
    with pytest.raises(ValueError):
        parse_modes("1;2")
