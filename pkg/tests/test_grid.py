import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nutaxis.errors import NegativeField, NonFiniteField, NonpositiveField
from nutaxis.grid import (Field, Grid2D, divergence, face_gradients, integrate, lp_norm,
                          read_field, weighted_gradient_functional, write_field)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid2D(1, 4)
    with pytest.raises(ValueError):
        Grid2D(4, 4, lx=0.0)
    with pytest.raises(ValueError):
        Grid2D(4, 4, ly=-1.0)
    g = Grid2D(8, 4, 2.0, 0.5)
    assert g.hx * g.nx == g.lx and g.hy * g.ny == g.ly
    assert g.area == 1.0 and g.shape == (4, 8) and g.size == 32


def test_field_rejects_wrong_size_and_nonfinite():
    g = Grid2D(2, 2)
    with pytest.raises(ValueError):
        Field(g, [1.0, 2.0, 3.0])
    with pytest.raises(NonFiniteField):
        integrate(Field(g, [1.0, np.nan, 0.0, 0.0]))


def test_integrate_examples():
    assert integrate(Grid2D(7, 5).constant(1.0)) == pytest.approx(1.0, abs=1e-15)
    assert integrate(Grid2D(3, 3).constant(0.0)) == 0.0
    assert integrate(Field(Grid2D(2, 2), [1, 2, 3, 4])) == 2.5


def test_row_major_order():
    g = Grid2D(3, 2)
    f = Field(g, np.arange(6.0))
    # k = j * nx + i: second row starts at index 3
    assert f.values[1, 0] == 3.0 and f.values[0, 2] == 2.0


def test_face_gradients_examples():
    g = Grid2D(6, 5)
    gx, gy = face_gradients(g.constant(3.0))
    assert not gx.any() and not gy.any()
    assert gx.shape == (5, 7) and gy.shape == (6, 6)
    gx, gy = face_gradients(g.sample(lambda x, y: x))
    assert np.allclose(gx[:, 1:-1], 1.0, rtol=0, atol=1e-13)
    assert not gx[:, [0, -1]].any() and not gy.any()
    gx, _ = face_gradients(Field(Grid2D(2, 2), [1.0, 3.0, 1.0, 3.0]))
    assert gx[0, 1] == 4.0


def test_lp_norm_examples():
    g = Grid2D(4, 4)
    assert lp_norm(g.constant(2.0), 2) == pytest.approx(2.0)
    assert lp_norm(g.constant(0.0), 3.5) == 0.0
    assert lp_norm(Field(Grid2D(2, 2), [1, 1, 1, 3]), 2) == pytest.approx(math.sqrt(3), rel=1e-15)
    with pytest.raises(NegativeField):
        lp_norm(Field(Grid2D(2, 2), [1, -1, 1, 3]), 2)
    with pytest.raises(ValueError):
        lp_norm(g.constant(1.0), 0.5)


def test_weighted_gradient_functional_examples():
    g = Grid2D(16, 16)
    for a, b in [(2, 1), (4, 3), (6, 5), (3, 0)]:
        assert weighted_gradient_functional(g.constant(2.0), a, b) == 0.0
    fine = Grid2D(256, 8)
    # interior faces are exact; the zero boundary faces cost O(h)
    val = weighted_gradient_functional(fine.sample(lambda x, y: 1 + x), 2, 0)
    assert val == pytest.approx(1.0 - 1.0 / 256, rel=1e-12)
    val = weighted_gradient_functional(fine.sample(lambda x, y: np.exp(x)), 2, 1)
    assert val == pytest.approx(math.e - 1, rel=1e-2)
    with pytest.raises(NonpositiveField):
        weighted_gradient_functional(Field(Grid2D(2, 2), [1, 0, 1, 1]), 2, 1)
    with pytest.raises(ValueError):
        weighted_gradient_functional(g.constant(1.0), 1, 0)


def test_weighted_functional_converges_in_interior():
    # the per-cell reconstruction is second order away from the boundary layer
    errs = []
    for n in (64, 128, 256):
        g = Grid2D(n, 4)
        f = g.sample(lambda x, y: np.exp(x))
        w = weighted_gradient_functional(f, 2, 1)
        errs.append(abs(w - (math.e - 1)))
    assert errs[1] < errs[0] and errs[2] < errs[1]


@given(st.integers(2, 9), st.integers(2, 9), st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 10**6))
def test_integrate_linear(nx, ny, a, b, seed):
    rng = np.random.default_rng(seed)
    g = Grid2D(nx, ny, 1.7, 0.6)
    f = rng.normal(size=g.shape)
    h = rng.normal(size=g.shape)
    lhs = integrate(Field(g, a * f + b * h))
    rhs = a * integrate(Field(g, f)) + b * integrate(Field(g, h))
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@given(st.integers(2, 9), st.integers(2, 9), st.integers(0, 10**6))
def test_divergence_telescopes(nx, ny, seed):
    rng = np.random.default_rng(seed)
    g = Grid2D(nx, ny)
    fx = rng.normal(size=(ny, nx + 1))
    fy = rng.normal(size=(ny + 1, nx))
    fx[:, [0, -1]] = 0.0
    fy[[0, -1], :] = 0.0
    total = integrate(Field(g, divergence(fx, fy, g)))
    assert abs(total) <= 1e-13 * (np.abs(fx).sum() + np.abs(fy).sum())


@given(st.integers(2, 9), st.integers(2, 9), st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_affine_gradients_exact(nx, ny, c, a, b):
    g = Grid2D(nx, ny, 2.0, 1.0)
    gx, gy = face_gradients(g.sample(lambda x, y: c + a * x + b * y))
    assert np.allclose(gx[:, 1:-1], a, atol=1e-12)
    assert np.allclose(gy[1:-1, :], b, atol=1e-12)


@given(st.integers(0, 10**6), st.sampled_from([(2, 1), (4, 3), (6, 5), (2, 0), (5, 2)]))
def test_weighted_functional_nonnegative_and_pure(seed, ab):
    rng = np.random.default_rng(seed)
    g = Grid2D(7, 6)
    v = Field(g, rng.uniform(0.1, 2.0, g.shape))
    before = v.values.copy()
    w1 = weighted_gradient_functional(v, *ab)
    w2 = weighted_gradient_functional(v, *ab)
    assert w1 >= 0 and w1 == w2
    assert np.array_equal(v.values, before)


def test_snapshot_round_trip(tmp_path, rng):
    g = Grid2D(5, 3, 0.1, 2.0 / 3.0)
    f = Field(g, rng.normal(size=g.shape) * 1e-7 + 1.0 / 3.0)
    p = tmp_path / "u.fld"
    write_field(p, f, 0.1 + 0.2)
    text = p.read_text().splitlines()
    assert text[0].startswith("# 5 3 ") and len(text) == 1 + 15
    back, t = read_field(p)
    assert back.grid == g and t == 0.1 + 0.2
    assert np.array_equal(back.values, f.values)
