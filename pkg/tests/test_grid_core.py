import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dngbrane.errors import DegenerateGeometryError, NonFiniteError
from dngbrane.grid_core import (Grid, d2_tau, d_tau, divergence_u, gradient_u, integrate_slice,
                                partial_u, safe_det, safe_inv)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid((2,))
    with pytest.raises(ValueError):
        Grid((8, 8, 8))
    with pytest.raises(ValueError):
        Grid((8,), dtau=0.0)
    g = Grid((16, 8))
    assert g.p == 2 and g.size == 128
    assert g.measure == pytest.approx((2 * np.pi) ** 2 / 128)
    r = g.refined()
    assert r.shape == (32, 16) and r.dtau == g.dtau / 2


def test_centered_difference_matches_discrete_symbol():
    # D e^{iku} = i sin(k du)/du e^{iku} exactly on the periodic grid
    g = Grid((32,))
    u, du = g.axis(0), g.spacing[0]
    for k in (1, 3, 7):
        d = partial_u(np.sin(k * u), g, 0)
        np.testing.assert_allclose(d, np.sin(k * du) / du * np.cos(k * u), atol=1e-13)


def test_centered_difference_second_order():
    errs = []
    for n in (32, 64, 128):
        g = Grid((n,))
        u = g.axis(0)
        f = np.exp(np.sin(u))
        errs.append(np.max(np.abs(partial_u(f, g, 0) - np.cos(u) * f)))
    assert 3.8 < errs[0] / errs[1] < 4.2
    assert 3.8 < errs[1] / errs[2] < 4.2


def test_winding_makes_linear_coordinate_exact():
    g = Grid((10,), offset=0.3)
    u = g.axis(0)
    d = partial_u(2.5 * u, g, 0, winding=2.5 * g.lengths[0])
    np.testing.assert_allclose(d, 2.5, atol=1e-14)


def test_gradient_and_divergence_on_membrane():
    g = Grid((24, 20))
    u, v = g.coords()
    f = np.sin(u) * np.cos(2 * v)
    grad = gradient_u(f, g)
    assert grad.shape == (24, 20, 2)
    du, dv = g.spacing
    np.testing.assert_allclose(grad[..., 0], np.sin(du) / du * np.cos(u) * np.cos(2 * v), atol=1e-13)
    np.testing.assert_allclose(grad[..., 1], -np.sin(2 * dv) / dv * np.sin(u) * np.sin(2 * v), atol=1e-13)
    # divergence of a gradient of a periodic field integrates to zero
    assert abs(integrate_slice(divergence_u(grad, g), g)) < 1e-12


def test_integrate_slice_is_exact_for_trig_polynomials():
    g = Grid((16,))
    u = g.axis(0)
    assert integrate_slice(np.cos(u) ** 2, g) == pytest.approx(np.pi, abs=1e-13)
    assert integrate_slice(np.ones(16), g) == pytest.approx(2 * np.pi)
    with pytest.raises(NonFiniteError):
        integrate_slice(np.full(16, np.nan), g)


def test_time_derivatives_exact_on_low_order_polynomials():
    t = np.arange(6) * 0.1
    np.testing.assert_allclose(d_tau(3 * t**2 - t, 0.1), 6 * t - 1, atol=1e-12)
    np.testing.assert_allclose(d_tau(t**2, 0.1, index=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(d2_tau(t**3, 0.1), 6 * t, atol=1e-10)
    with pytest.raises(ValueError):
        d_tau(np.zeros(2), 0.1)


def test_safe_det_and_inverse():
    m = np.array([[2.0, 1.0], [1.0, 3.0]])
    assert safe_det(m) == pytest.approx(5.0)
    np.testing.assert_allclose(safe_inv(m) @ m, np.eye(2), atol=1e-15)
    with pytest.raises(DegenerateGeometryError):
        safe_det(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(DegenerateGeometryError):
        safe_inv(np.zeros((3, 2, 2)))


@settings(max_examples=30, deadline=None)
@given(shift=st.integers(0, 15), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_difference_is_linear_and_shift_equivariant(shift, a, b):
    g = Grid((16,))
    rng = np.random.default_rng(shift)
    f, h = rng.normal(size=(2, 16))
    lhs = partial_u(a * f + b * h, g, 0)
    np.testing.assert_allclose(lhs, a * partial_u(f, g, 0) + b * partial_u(h, g, 0), atol=1e-11)
    np.testing.assert_allclose(partial_u(np.roll(f, shift), g, 0), np.roll(partial_u(f, g, 0), shift),
                               atol=1e-12)


def test_reference_values():
    g = Grid((64,))
    u = g.axis(0)
    assert np.max(np.abs(partial_u(np.sin(u), g, 0) - np.cos(u))) <= g.spacing[0] ** 2
    assert not np.any(partial_u(np.full(64, 3.0), g, 0))
    g128 = Grid((128,))
    assert abs(integrate_slice(np.sin(g128.axis(0)) ** 2, g128) - np.pi) < 1e-12
    assert integrate_slice(np.zeros(128), g128) == 0.0
