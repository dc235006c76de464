import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dngbrane import adm_dynamics as adm
from dngbrane.background import conformal, minkowski
from dngbrane.charges import (angular_momentum_density, angular_momentum_from_density, charges,
                              conservation_monitor, frame_from_state, momentum_density,
                              total_angular_momentum, total_momentum)
from dngbrane.errors import BackgroundError
from dngbrane.grid_core import Grid


def string_state(X, vel, n, alpha=1.0, winding=None):
    return adm.state_from_velocity(X, vel, Grid((n,)), minkowski(4), alpha, winding=winding)


def circle(n=64, R=1.0, alpha=1.0, center=(0.0, 0.0, 0.0), vel=None):
    u = Grid((n,)).axis(0)
    X = np.stack([0 * u + center[0], R * np.cos(u) + center[1], R * np.sin(u) + center[2], 0 * u], -1)
    if vel is None:
        vel = np.tile([1.0, 0, 0, 0], (n, 1))
    return string_state(X, vel, n, alpha)


def c(n):
    du = 2 * np.pi / n
    return np.sin(du) / du


@pytest.mark.parametrize("R,alpha", [(1.0, 1.0), (2.5, 0.7)])
def test_energy_of_circle_at_rest(R, alpha):
    s = circle(R=R, alpha=alpha)
    P, routes = total_momentum(s)
    np.testing.assert_allclose(P, [-2 * np.pi * alpha * R * c(64), 0, 0, 0], atol=1e-13)
    assert charges(s).energy == pytest.approx(2 * np.pi * alpha * R * c(64))
    for r in routes.values():
        np.testing.assert_allclose(r, P, atol=1e-13)


def test_boosted_flat_string_velocity_ratio():
    n, v = 32, 0.6
    u = Grid((n,)).axis(0)
    X = np.stack([0 * u, u, 0 * u, 0 * u], -1)
    W = np.array([[0.0, 2 * np.pi, 0, 0]])
    s = string_state(X, np.tile([1.0, 0, v, 0], (n, 1)), n, winding=W)
    P, _ = total_momentum(s)
    assert P[2] / P[0] == pytest.approx(v, abs=1e-14)
    assert -P[0] == pytest.approx(2 * np.pi / np.sqrt(1 - v**2))


def test_momentum_density_is_tangential():
    u = Grid((48,)).axis(0)
    vel = np.stack([np.ones_like(u), 0.3 * np.cos(2 * u), 0.2 * np.sin(u), 0.1 * np.cos(u)], -1)
    s = circle(n=48, vel=vel)
    frame = frame_from_state(s)
    dens = momentum_density(frame, s.alpha)
    n_low = np.einsum("...im,...mn->...in", frame.normals, frame.g)
    assert np.max(np.abs(np.einsum("...in,...an->...ia", n_low, dens))) < 1e-10
    # contraction with the slice surface element gives back the canonical momentum density
    N = np.sqrt(-1 / frame.gamma_inv[..., 0, 0])
    recon = np.einsum("...am,...a->...m", dens, frame.tau_low) / N[..., None]
    np.testing.assert_allclose(recon, s.phat_up(), atol=1e-12)


def test_angular_momentum_density_symmetries():
    s = circle(n=32, vel=np.tile([1.0, 0.2, 0, 0.1], (32, 1)))
    frame = frame_from_state(s)
    dens = angular_momentum_density(frame, s.X, s.alpha)
    np.testing.assert_array_equal(dens, -np.swapaxes(dens, -1, -2))
    shift = np.array([0.3, -1.0, 2.0, 0.5])
    moved = angular_momentum_density(frame, s.X + shift, s.alpha)
    P = momentum_density(frame, s.alpha)
    expected = 0.5 * (np.einsum("...ab,c->...abc", P, shift) - np.einsum("...ac,b->...abc", P, shift))
    np.testing.assert_allclose(moved - dens, expected, atol=1e-13)


def test_circle_angular_momentum_and_translation():
    s = circle()
    np.testing.assert_allclose(total_angular_momentum(s), 0.0, atol=1e-13)
    moved = circle(center=(0.0, 0.8, 0.0))
    M = total_angular_momentum(moved)
    assert M[0, 1] == pytest.approx(2 * np.pi * c(64) * 0.8)
    np.testing.assert_allclose(M, -M.T)
    np.testing.assert_allclose(angular_momentum_from_density(frame_from_state(moved), moved), M, atol=1e-12)


def test_rotating_string_angular_momentum_conserved():
    from dngbrane.scenarios_cli import ScenarioConfig, evolve_config

    t = evolve_config(ScenarioConfig("rotating_folded_string", n=(64,), dtau=5e-3, tau_end=0.5,
                                     record_every=20))
    mon = conservation_monitor(t)
    M0 = mon["M"][0]
    assert abs(M0[1, 2]) > 1.0
    others = np.abs(M0).copy()
    others[1, 2] = others[2, 1] = 0.0
    assert others.max() < 1e-12
    assert mon["M_drift_rel"] < 1e-5 and mon["P_drift_rel"] < 1e-6


def test_flat_static_brane_has_no_drift():
    from dngbrane.scenarios_cli import ScenarioConfig, evolve_config

    t = evolve_config(ScenarioConfig("flat_static_brane", n=(16,), dtau=1e-2, steps=30, record_every=10))
    mon = conservation_monitor(t)
    assert mon["P_drift"] < 1e-12


def test_shifted_gauge_routes_agree():
    u = Grid((40,)).axis(0)
    vel = np.stack([np.ones_like(u), 0.2 * np.cos(u), 0.1 * np.sin(3 * u), 0 * u], -1)
    s = circle(n=40, vel=vel)
    gauge = adm.GaugeChoice("custom", lapse=1 + 0.3 * np.sin(u), shift=0.2 * np.cos(2 * u)[:, None])
    P, routes = total_momentum(s, gauge)
    for r in routes.values():
        np.testing.assert_allclose(r, P, atol=1e-12)


def test_curved_background_is_rejected():
    u = Grid((16,)).axis(0)
    X = np.stack([0 * u, np.cos(u), np.sin(u), 0 * u], -1)
    s = adm.state_from_velocity(X, np.tile([1.0, 0, 0, 0], (16, 1)), Grid((16,)), conformal(4, 0.05))
    with pytest.raises(BackgroundError):
        total_momentum(s)
    with pytest.raises(BackgroundError):
        total_angular_momentum(s)


@settings(max_examples=20, deadline=None)
@given(vx=st.floats(-0.5, 0.5), vz=st.floats(-0.5, 0.5), a=st.floats(0.2, 3.0))
def test_energy_positive_and_scales_with_tension(vx, vz, a):
    s1 = circle(n=24, vel=np.tile([1.0, vx, 0.0, vz], (24, 1)))
    s2 = circle(n=24, alpha=a, vel=np.tile([1.0, vx, 0.0, vz], (24, 1)))
    e1, e2 = charges(s1).energy, charges(s2).energy
    assert e1 > 0
    assert e2 == pytest.approx(a * e1, rel=1e-12)
