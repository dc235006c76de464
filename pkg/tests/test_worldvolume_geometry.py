import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dngbrane.background import conformal, minkowski, minkowski_metric
from dngbrane.errors import DegenerateGeometryError
from dngbrane.grid_core import Grid
from dngbrane.worldvolume_geometry import (build_frame, extrinsic_curvature, gauss_weingarten_residual,
                                           induced_metrics, normal_frame, slice_normal)


def cylinder(R=1.5, n=32, T=5, dtau=0.1):
    """Static circle of radius R: X = (τ, R cos u, R sin u, 0)."""
    grid = Grid((n,), dtau=dtau)
    u = grid.axis(0)
    X = np.zeros((T, n, 4))
    X[..., 0] = (np.arange(T) * dtau)[:, None]
    X[..., 1], X[..., 2] = R * np.cos(u), R * np.sin(u)
    return X, grid


def test_cylinder_metric_and_curvature():
    R = 1.5
    X, grid = cylinder(R)
    du = grid.spacing[0]
    c = np.sin(du) / du  # symbol of the centered difference on the first harmonic
    frame = build_frame(X, grid, minkowski(4))
    np.testing.assert_allclose(frame.gamma[..., 0, 0], -1.0, atol=1e-13)
    np.testing.assert_allclose(frame.gamma[..., 1, 1], (R * c) ** 2, atol=1e-13)
    np.testing.assert_allclose(frame.gamma[..., 0, 1], 0.0, atol=1e-13)
    K = extrinsic_curvature(X, grid, minkowski(4), frame).K
    np.testing.assert_allclose(np.linalg.norm(K[..., 1, 1, :], axis=-1), R * c**2, atol=1e-12)
    np.testing.assert_allclose(K[..., 0, :, :], 0.0, atol=1e-12)
    res = gauss_weingarten_residual(X, grid, minkowski(4), 2)
    assert res["gauss"] < 1e-12 and res["antisymmetric_K"] < 1e-12


def test_weingarten_residual_on_cylinder_is_second_order():
    # the tangent projector carries second harmonics, so its centered derivative is O(du^2)
    r = [gauss_weingarten_residual(*cylinder(n=n), minkowski(4), 2)["weingarten"] for n in (32, 64, 128)]
    assert 3.8 < r[0] / r[1] < 4.2 and 3.8 < r[1] / r[2] < 4.2


def test_flat_string_has_unit_lapse_and_no_curvature():
    grid = Grid((16,), dtau=0.2)
    X = np.zeros((4, 16, 3))
    X[..., 0] = (np.arange(4) * 0.2)[:, None]
    X[..., 1] = grid.axis(0)
    w = np.zeros((1, 3))
    w[0, 1] = grid.lengths[0]
    frame = build_frame(X, grid, minkowski(3), winding=w)
    np.testing.assert_allclose(frame.gamma, np.broadcast_to(np.diag([-1.0, 1.0]), frame.gamma.shape), atol=1e-14)
    np.testing.assert_allclose(frame.eta, np.broadcast_to([1.0, 0, 0], frame.eta.shape), atol=1e-14)
    assert np.max(np.abs(extrinsic_curvature(X, grid, minkowski(3), frame, w).K)) < 1e-13


def test_slice_normal_of_adm_metric():
    N, beta, h = 2.0, 0.3, 4.0
    gamma = np.array([[-N**2 + beta**2 * h, beta * h], [beta * h, h]])
    e = np.array([[1.0, 0, 0], [0, 1.0, 0]])
    tau_up, tau_low, lapse = slice_normal(gamma, e)
    assert lapse == pytest.approx(N)
    np.testing.assert_allclose(tau_low, [-N, 0.0], atol=1e-14)
    np.testing.assert_allclose(tau_up, [1 / N, -beta / N], atol=1e-14)


def test_collapsed_slice_is_rejected():
    X, grid = cylinder(R=1.0)
    X[..., 1:] = 0.0
    with pytest.raises(DegenerateGeometryError):
        build_frame(X, grid, minkowski(4))


def test_spacelike_evolution_is_rejected():
    e = np.array([[0.0, 1, 0], [0, 0, 1.0]])
    with pytest.raises(DegenerateGeometryError):
        induced_metrics(e, minkowski_metric(3))


def test_curvature_in_conformal_background_is_symmetric():
    X, grid = cylinder(R=0.8, n=48)
    bg = conformal(4, epsilon=0.1, axis=1)
    curv = extrinsic_curvature(X, grid, bg)
    np.testing.assert_allclose(curv.K, np.swapaxes(curv.K, -2, -3))
    assert curv.antisymmetric_part < 1e-3


@settings(max_examples=30, deadline=None)
@given(rap=st.floats(-1.5, 1.5), ang=st.floats(0, 2 * np.pi), tilt=st.floats(-0.5, 0.5))
def test_normal_frame_is_orthonormal(rap, ang, tilt):
    g = minkowski_metric(4)
    e0 = np.array([np.cosh(rap), np.sinh(rap) * np.cos(ang), np.sinh(rap) * np.sin(ang), 0.0])
    e1 = np.array([0.0, -np.sin(ang), np.cos(ang), tilt])
    e = np.stack([e0, e1])
    n = normal_frame(e, g)
    np.testing.assert_allclose(n @ g @ n.T, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(n @ g @ e.T, 0.0, atol=1e-12)
