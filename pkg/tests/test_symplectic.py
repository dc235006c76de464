import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dngbrane import symplectic as sy
from dngbrane.adm_dynamics import state_from_velocity
from dngbrane.background import minkowski
from dngbrane.grid_core import Grid


def random_slice(seed, n=6, D=4):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, D)), rng.normal(size=(n, D)), Grid((n,))


def sq_functional(mu, grid):
    """Nonlinear test functional sum_k X^mu_k^2 phat_mu_k, with FD gradient only."""
    return sy.PhaseFunctional(f"sq{mu}", lambda X, p: float(np.sum(X[:, mu] ** 2 * p[:, mu])))


def test_form_is_antisymmetric_and_vanishes_on_diagonal():
    X1, p1, g = random_slice(0)
    X2, p2, _ = random_slice(1)
    assert sy.symplectic_form(X1, p1, X2, p2, g) == -sy.symplectic_form(X2, p2, X1, p1, g)
    assert sy.symplectic_form(X1, p1, X1, p1, g) == 0.0


def test_rigid_translations_pair_to_zero():
    g = Grid((16,))
    a = np.zeros((3, 16, 4))
    a[..., 1] = 1.0
    b = np.zeros((3, 16, 4))
    b[..., 3] = -2.0
    d1 = sy.Perturbation(a, np.zeros_like(a))
    d2 = sy.Perturbation(b, np.zeros_like(b))
    assert sy.symplectic_eval(d1, d2, g, 1) == 0.0
    assert sy.slice_independence_check(d1, d1, g)["degenerate"]


@pytest.mark.parametrize("k1,k2,dirs", [(1, 1, (2, 2)), (2, 3, (2, 2)), (1, 1, (2, 3))])
def test_transverse_waves_are_slice_independent(k1, k2, dirs):
    g = Grid((64,), dtau=0.05)
    taus = np.arange(41) * 0.05
    d1 = sy.transverse_wave(g, taus, k1, dirs[0])
    d2 = sy.transverse_wave(g, taus, k2, dirs[1], phase=0.4)
    r = sy.slice_independence_check(d1, d2, g)
    if k1 == k2 and dirs[0] == dirs[1]:
        assert not r["degenerate"] and r["deviation"] < 1e-8
    else:
        # orthogonal modes: omega vanishes on every slice
        assert r["degenerate"] or np.max(np.abs(r["values"])) < 1e-12


def test_continuum_dispersion_breaks_slice_independence():
    g = Grid((16,), dtau=0.1)
    taus = np.arange(30) * 0.1
    d1 = sy.transverse_wave(g, taus, 3, 2, discrete=False)
    d2 = sy.transverse_wave(g, taus, 3, 2, phase=0.4)
    assert sy.slice_independence_check(d1, d2, g)["deviation"] > 1e-3


def test_point_brackets():
    X, p, g = random_slice(2, n=5)
    assert sy.poisson_bracket(sy.point_X(1, 3), sy.point_phat(1, 3), X, p, g) == 1 / g.measure
    assert sy.poisson_bracket(sy.point_phat(1, 3), sy.point_X(1, 3), X, p, g) == -1 / g.measure
    assert sy.poisson_bracket(sy.point_X(1, 3), sy.point_phat(2, 3), X, p, g) == 0.0
    assert sy.poisson_bracket(sy.point_X(0, 1), sy.point_X(0, 1), X, p, g) == 0.0
    np.testing.assert_array_equal(sy.bracket_matrix(X, p, g),
                                  sy.canonical_bracket_realization(X.size, g.measure))


def test_hamiltonian_vector_fields_of_point_functionals():
    X, p, g = random_slice(3, n=5)
    VX, Vp = sy.hamiltonian_vector_field(sy.point_phat(2, 4), X, p, g)
    expected = np.zeros_like(X)
    expected[4, 2] = 1 / g.measure
    np.testing.assert_array_equal(VX, expected)
    assert not np.any(Vp)
    VX, Vp = sy.hamiltonian_vector_field(sy.point_X(2, 4), X, p, g)
    assert not np.any(VX)
    np.testing.assert_array_equal(Vp, -expected)


def test_angular_momentum_gradient_matches_finite_differences():
    X, p, g = random_slice(4, n=4)
    f = sy.angular_momentum_functional(0, 2, g)
    gX, gp = f.grad(X, p)
    fX, fp = sy.fd_gradient(f, X, p)
    np.testing.assert_allclose(gX, fX, atol=1e-8)
    np.testing.assert_allclose(gp, fp, atol=1e-8)
    with pytest.raises(ValueError):
        sq_functional(1, g).grad(X, p, fd_fallback=False)


def test_lorentz_boost_against_momentum():
    X, p, g = random_slice(5, n=8)
    P = [sy.momentum_functional(m, g) for m in range(4)]
    M01 = sy.angular_momentum_functional(0, 1, g)
    assert sy.poisson_bracket(M01, P[0], X, p, g) == pytest.approx(-P[1](X, p), abs=1e-12)
    for a in range(4):
        for b in range(4):
            assert abs(sy.poisson_bracket(P[a], P[b], X, p, g)) < 1e-14


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_bracket_identities(seed):
    X, p, g = random_slice(seed, n=3, D=3)
    f = sy.angular_momentum_functional(1, 2, g)
    h = sy.point_phat(1, 0)
    k = sq_functional(2, g)
    assert sy.poisson_bracket(k, k, X, p, g) == 0.0
    assert sy.poisson_bracket(f, k, X, p, g) == pytest.approx(-sy.poisson_bracket(k, f, X, p, g))
    # Leibniz
    fh = sy.product_functional(f, h)
    lhs = sy.poisson_bracket(fh, k, X, p, g)
    rhs = f(X, p) * sy.poisson_bracket(h, k, X, p, g) + h(X, p) * sy.poisson_bracket(f, k, X, p, g)
    assert lhs == pytest.approx(rhs, rel=1e-6, abs=1e-6)
    # the bracket is omega evaluated on the vector fields
    Vf, Vk = (sy.hamiltonian_vector_field(q, X, p, g) for q in (f, k))
    omega = sy.symplectic_form(Vk[0], Vk[1], Vf[0], Vf[1], g)
    assert sy.poisson_bracket(f, k, X, p, g) == pytest.approx(omega, rel=1e-6, abs=1e-6)


def test_jacobi_identity():
    X, p, g = random_slice(6, n=3, D=3)
    f = sy.angular_momentum_functional(0, 1, g)
    h = sy.momentum_functional(1, g)
    k = sq_functional(1, g)
    scale = abs(sy.poisson_bracket(f, k, X, p, g)) + 1.0
    assert sy.jacobi_residual(f, h, k, X, p, g) < 1e-4 * scale


def test_poincare_algebra_standard_convention():
    grid = Grid((32,))
    u = grid.axis(0)
    X = np.stack([0.1 + 0 * u, np.cos(u) + 0.3, 0.5 * np.sin(u), 0.2 * np.cos(2 * u)], -1)
    vel = np.stack([np.ones_like(u), 0.3 * np.sin(u), 0.1 + 0 * u, 0.2 * np.cos(u)], -1)
    s = state_from_velocity(X, vel, grid, minkowski(4))
    r = sy.poincare_algebra_check(s.X, s.phat, grid)
    assert r["closes"] and r["convention"] == "standard"
    assert r["MP"] < 1e-12 and r["PP"] == 0.0
    assert r["MM_literal"] > 1e-3


def test_nearby_requires_matching_slices():
    from dngbrane.scenarios_cli import ScenarioConfig, evolve_config

    a = evolve_config(ScenarioConfig("collapsing_circle", n=(16,), dtau=1e-2, steps=4, record_every=1))
    b = evolve_config(ScenarioConfig("collapsing_circle", n=(16,), dtau=2e-2, steps=4, record_every=1))
    with pytest.raises(ValueError):
        sy.Perturbation.nearby(a, b, 1e-4)
    d = sy.Perturbation.nearby(a, a, 1e-4)
    assert not np.any(d.dX) and len(d) == 5
    with pytest.raises(IndexError):
        sy.symplectic_eval(d, d, a.grid, 9)
