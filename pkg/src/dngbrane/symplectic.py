"""Covariant symplectic form on solution perturbations and grid Poisson brackets.

The symplectic form on a slice is ``omega = int dphat_mu ^ dX^mu``, evaluated on
two perturbations as ``sum_k du [d1phat . d2X - d2phat . d1X]``.

Brackets use ``[f, g] = sum_k (df/dX . dg/dphat - dg/dX . df/dphat) / du`` so
that ``[X^mu(u_j), phat_nu(u_k)] = delta^mu_nu delta_jk / du``, the grid form of
``delta^mu_nu delta(u - u')``.  Hamiltonian vector fields solve
``V_f _| omega = -df``; with these conventions ``[f, g] = omega(V_g, V_f)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Callable

import numpy as np

from .background import minkowski_metric
from .grid_core import Grid


@dataclass(frozen=True, eq=False)
class Perturbation:
    """Tangent vector ``(dX^mu, dphat_mu)`` to the solution space along a trajectory.

    Arrays have shape ``(T, *grid.shape, D)``.
    """

    dX: np.ndarray
    dphat: np.ndarray
    tag: str = "analytic"
    amplitude: float = 0.0

    @classmethod
    def nearby(cls, base, perturbed, amplitude: float, constraint_tol: float = 1e-8):
        """Finite-difference perturbation ``(perturbed - base) / amplitude`` of two trajectories."""
        from .adm_dynamics import constraint_norms

        n = min(len(base), len(perturbed))
        if not np.allclose(base.taus[:n], perturbed.taus[:n], rtol=0, atol=1e-12):
            raise ValueError("trajectories are not sampled on the same τ values")
        for traj in (base, perturbed):
            if max(constraint_norms(traj.state(0))) > constraint_tol:
                raise ValueError("nearby-solution perturbations need constraint-satisfying data")
        return cls(dX=(perturbed.X[:n] - base.X[:n]) / amplitude,
                   dphat=(perturbed.phat[:n] - base.phat[:n]) / amplitude,
                   tag="nearby-solution", amplitude=amplitude)

    def __len__(self):
        return self.dX.shape[0]


def symplectic_form(dX1, dp1, dX2, dp2, grid: Grid) -> float:
    """``sum_k du [dp1 . dX2 - dp2 . dX1]`` on one slice."""
    dens = np.einsum("...m,...m->...", dp1, dX2) - np.einsum("...m,...m->...", dp2, dX1)
    return float(dens.sum() * grid.measure)


def symplectic_eval(d1: Perturbation, d2: Perturbation, grid: Grid, slice_index: int) -> float:
    T = len(d1)
    if not -T <= slice_index < T or len(d2) != T:
        raise IndexError(f"slice {slice_index} out of range for {T} slices")
    return symplectic_form(d1.dX[slice_index], d1.dphat[slice_index],
                           d2.dX[slice_index], d2.dphat[slice_index], grid)


def slice_independence_check(d1: Perturbation, d2: Perturbation, grid: Grid,
                             slices=None) -> dict:
    """Spread of ``omega(d1, d2)`` across slices, relative to ``max |omega|``.

    When ``omega`` vanishes (to rounding) on every slice the pair is reported
    as degenerate, not as a failure.
    """
    slices = range(len(d1)) if slices is None else slices
    values = np.array([symplectic_eval(d1, d2, grid, j) for j in slices])
    scale = float(np.max(np.abs(values)))
    norm = max(float(np.sqrt(np.sum(d1.dX[j]**2 + d1.dphat[j]**2) * np.sum(d2.dX[j]**2 + d2.dphat[j]**2)))
               for j in slices) * grid.measure
    if scale <= 1e-13 * max(norm, np.finfo(float).tiny):
        return {"deviation": float("nan"), "degenerate": True, "values": values}
    dev = float((values.max() - values.min()) / scale)
    return {"deviation": dev, "degenerate": False, "values": values}


@dataclass(frozen=True, eq=False)
class PhaseFunctional:
    """Real function of a slice ``(X, phat)`` with an optional analytic gradient.

    ``gradient(X, phat)`` returns ``(df/dX, df/dphat)`` as arrays shaped like the
    state.  Without it, central finite differences are used.
    """

    name: str
    evaluator: Callable
    gradient: Callable = None

    def __call__(self, X, phat) -> float:
        return float(self.evaluator(X, phat))

    def grad(self, X, phat, fd_fallback: bool = True, step: float = 1e-6):
        if self.gradient is not None:
            return self.gradient(X, phat)
        if not fd_fallback:
            raise ValueError(f"functional {self.name!r} has no gradient and fallback is disabled")
        return fd_gradient(self, X, phat, step)


def fd_gradient(f: PhaseFunctional, X, phat, step: float = 1e-6):
    X = np.asarray(X, dtype=float)
    phat = np.asarray(phat, dtype=float)
    gX, gp = np.zeros_like(X), np.zeros_like(phat)
    for arr, out, which in ((X, gX, 0), (phat, gp, 1)):
        flat = out.reshape(-1)
        for idx in range(arr.size):
            plus, minus = arr.copy().reshape(-1), arr.copy().reshape(-1)
            h = step * max(1.0, abs(plus[idx]))
            plus[idx] += h
            minus[idx] -= h
            args_p = (plus.reshape(arr.shape), phat) if which == 0 else (X, plus.reshape(arr.shape))
            args_m = (minus.reshape(arr.shape), phat) if which == 0 else (X, minus.reshape(arr.shape))
            flat[idx] = (f.evaluator(*args_p) - f.evaluator(*args_m)) / (2 * h)
    return gX, gp


def point_X(mu: int, index) -> PhaseFunctional:
    index = tuple(np.atleast_1d(index))

    def grad(X, phat):
        gX = np.zeros_like(X)
        gX[index + (mu,)] = 1.0
        return gX, np.zeros_like(phat)

    return PhaseFunctional(f"X^{mu}{list(index)}", lambda X, p: X[index + (mu,)], grad)


def point_phat(nu: int, index) -> PhaseFunctional:
    index = tuple(np.atleast_1d(index))

    def grad(X, phat):
        gp = np.zeros_like(phat)
        gp[index + (nu,)] = 1.0
        return np.zeros_like(X), gp

    return PhaseFunctional(f"phat_{nu}{list(index)}", lambda X, p: p[index + (nu,)], grad)


def momentum_functional(mu: int, grid: Grid, metric=None) -> PhaseFunctional:
    """``P^mu = int eta^{mu nu} phat_nu`` in flat space."""
    def value(X, phat):
        eta = minkowski_metric(X.shape[-1]) if metric is None else metric
        return float((phat @ eta[mu]).sum() * grid.measure)

    def grad(X, phat):
        eta = minkowski_metric(X.shape[-1]) if metric is None else metric
        return np.zeros_like(X), np.broadcast_to(eta[mu] * grid.measure, phat.shape).copy()

    return PhaseFunctional(f"P^{mu}", value, grad)


def angular_momentum_functional(a: int, b: int, grid: Grid, metric=None) -> PhaseFunctional:
    """``M^{ab} = int (phat^b X^a - phat^a X^b)`` in flat space."""
    def value(X, phat):
        eta = minkowski_metric(X.shape[-1]) if metric is None else metric
        pu = phat @ eta
        return float((X[..., a] * pu[..., b] - X[..., b] * pu[..., a]).sum() * grid.measure)

    def grad(X, phat):
        eta = minkowski_metric(X.shape[-1]) if metric is None else metric
        pu = phat @ eta
        gX = np.zeros_like(X)
        gX[..., a] += pu[..., b]
        gX[..., b] -= pu[..., a]
        gp = X[..., a, None] * eta[b] - X[..., b, None] * eta[a]
        return gX * grid.measure, gp * grid.measure

    return PhaseFunctional(f"M^{a}{b}", value, grad)


def product_functional(f: PhaseFunctional, g: PhaseFunctional) -> PhaseFunctional:
    def grad(X, phat):
        fX, fp = f.grad(X, phat)
        gX, gp = g.grad(X, phat)
        fv, gv = f(X, phat), g(X, phat)
        return fv * gX + gv * fX, fv * gp + gv * fp

    return PhaseFunctional(f"({f.name})*({g.name})", lambda X, p: f(X, p) * g(X, p), grad)


def poisson_bracket(f: PhaseFunctional, g: PhaseFunctional, X, phat, grid: Grid,
                    fd_fallback: bool = True) -> float:
    fX, fp = f.grad(X, phat, fd_fallback)
    gX, gp = g.grad(X, phat, fd_fallback)
    return float((np.sum(fX * gp) - np.sum(gX * fp)) / grid.measure)


def hamiltonian_vector_field(f: PhaseFunctional, X, phat, grid: Grid, fd_fallback: bool = True):
    """Components ``(V^X, V^phat)`` of ``V_f`` with ``V_f _| omega = -df``."""
    fX, fp = f.grad(X, phat, fd_fallback)
    return fp / grid.measure, -fX / grid.measure


def bracket_matrix(X, phat, grid: Grid) -> np.ndarray:
    """Bracket table of all point functionals ``z = (X^mu_k, phat_mu_k)``.

    Rows and columns run over the flattened ``X`` entries, then the flattened
    ``phat`` entries.
    """
    n = np.asarray(X).size
    gX = np.vstack([np.eye(n), np.zeros((n, n))])   # d z_a / dX
    gp = np.vstack([np.zeros((n, n)), np.eye(n)])   # d z_a / dphat
    return (gX @ gp.T - gp @ gX.T) / grid.measure


def canonical_bracket_realization(n: int, measure: float) -> np.ndarray:
    """Expected table: ``[X, phat] = 1/du``, ``[phat, X] = -1/du``, zero otherwise."""
    eye = np.eye(n) / measure
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def _lorentz_rhs_literal(eta, M, mu, nu, a, b):
    return (eta[nu, a] * M[mu, b] + eta[mu, a] * M[b, nu]
            + eta[nu, b] * M[a, mu] + eta[mu, b] * M[nu, a])


def _lorentz_rhs_standard(eta, M, mu, nu, a, b):
    return (eta[mu, a] * M[nu, b] - eta[mu, b] * M[nu, a]
            - eta[nu, a] * M[mu, b] + eta[nu, b] * M[mu, a])


def poincare_algebra_check(X, phat, grid: Grid, tol: float = 1e-6) -> dict:
    """Compare the grid brackets of ``P`` and ``M`` with the Poincaré algebra.

    The ``[M, M]`` table is checked against two sign conventions: the
    "literal" pattern ``eta^{nu a} M^{mu b} + eta^{mu a} M^{b nu} + eta^{nu b} M^{a mu}
    + eta^{mu b} M^{nu a}`` and the standard Lorentz algebra.  ``[M, P]`` and
    ``[P, P]`` have a single form.
    """
    X = np.asarray(X, dtype=float)
    phat = np.asarray(phat, dtype=float)
    D = X.shape[-1]
    eta = minkowski_metric(D)
    Pf = [momentum_functional(m, grid) for m in range(D)]
    Mf = [[angular_momentum_functional(m, n, grid) for n in range(D)] for m in range(D)]
    Pv = np.array([f(X, phat) for f in Pf])
    Mv = np.array([[Mf[m][n](X, phat) for n in range(D)] for m in range(D)])

    # gradients are evaluated once; brackets are then pure contractions
    gP = [f.grad(X, phat) for f in Pf]
    gM = [[Mf[m][n].grad(X, phat) for n in range(D)] for m in range(D)]

    def br(f, g):
        return float((np.sum(f[0] * g[1]) - np.sum(g[0] * f[1])) / grid.measure)

    res_literal = res_standard = res_mp = res_pp = 0.0
    for mu, nu, a, b in product(range(D), repeat=4):
        val = br(gM[mu][nu], gM[a][b])
        res_literal = max(res_literal, abs(val - _lorentz_rhs_literal(eta, Mv, mu, nu, a, b)))
        res_standard = max(res_standard, abs(val - _lorentz_rhs_standard(eta, Mv, mu, nu, a, b)))
    for mu, nu, a in product(range(D), repeat=3):
        val = br(gM[mu][nu], gP[a])
        res_mp = max(res_mp, abs(val - (eta[mu, a] * Pv[nu] - eta[a, nu] * Pv[mu])))
    for mu, nu in product(range(D), repeat=2):
        res_pp = max(res_pp, abs(br(gP[mu], gP[nu])))

    literal_ok = max(res_literal, res_mp, res_pp) < tol
    standard_ok = max(res_standard, res_mp, res_pp) < tol
    convention = "literal" if literal_ok else "standard" if standard_ok else "neither"
    if literal_ok and standard_ok:
        convention = "both"
    return {"MM_literal": res_literal, "MM_standard": res_standard, "MP": res_mp, "PP": res_pp,
            "convention": convention, "closes": literal_ok or standard_ok,
            "residual": min(max(res_literal, res_mp, res_pp), max(res_standard, res_mp, res_pp)),
            "P": Pv, "M": Mv}


def jacobi_residual(f, g, k, X, phat, grid: Grid) -> float:
    """``[f,[g,k]] + [g,[k,f]] + [k,[f,g]]`` with inner brackets as functionals."""
    def bracket_fn(a, b):
        return PhaseFunctional(f"[{a.name},{b.name}]",
                               lambda XX, pp: poisson_bracket(a, b, XX, pp, grid))

    terms = (poisson_bracket(f, bracket_fn(g, k), X, phat, grid)
             + poisson_bracket(g, bracket_fn(k, f), X, phat, grid)
             + poisson_bracket(k, bracket_fn(f, g), X, phat, grid))
    return float(abs(terms))


def transverse_wave(grid: Grid, taus, wavenumber: int, direction: int, alpha: float = 1.0,
                    phase: float = 0.0, D: int = 4, discrete: bool = True) -> Perturbation:
    """Travelling transverse wave on the static straight string ``X = (τ, u, 0, 0)``.

    ``dX^direction = cos(k u - w τ + phase)`` and ``dphat_direction = -alpha d_τ dX``
    solve the linearised equations; ``discrete=True`` uses the grid dispersion
    ``w = sin(k du) / du`` of the centered difference operator.
    """
    if grid.p != 1:
        raise ValueError("transverse waves are built for strings")
    u = grid.axis(0)
    k = wavenumber * 2 * np.pi / grid.lengths[0]
    du = grid.spacing[0]
    w = np.sin(k * du) / du if discrete else k
    taus = np.asarray(taus, dtype=float)
    arg = k * u[None, :] - w * taus[:, None] + phase
    dX = np.zeros((len(taus), grid.shape[0], D))
    dp = np.zeros_like(dX)
    dX[..., direction] = np.cos(arg)
    dp[..., direction] = -alpha * w * np.sin(arg)
    return Perturbation(dX=dX, dphat=dp, tag="analytic")
