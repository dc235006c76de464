"""Constrained Hamiltonian dynamics of Dirac-Nambu-Goto branes in ADM form.

Canonical variables on a slice are the embedding ``X^mu`` and the momentum
density covector ``phat_mu = -alpha sqrt(h) eta_mu`` (weight one).  The
Hamilton equations are written for the Lagrangian momentum
``P_mu = dL/dXdot^mu = -phat_mu``; with that sign the first Hamilton equation
``Xdot = 2 lambda P + lambda^A eps_A`` reproduces ``Xdot = N eta + N^A eps_A``
under ``lambda = N / (2 alpha sqrt h)``, ``lambda^A = N^A``.

With the multipliers held fixed the grid flow is exactly canonical in
``(X, P)``: ``Xdot = dG/dP`` and ``dP/dτ = -dG/dX`` (grid gradients divided by
``du``) for ``G = sum_k du [lambda F_0 + lambda^A P . eps_A]``.  Because
``F_A = phat . eps_A = -P . eps_A`` this generator is
``G = sum_k du [lambda F_0 - lambda^A F_A]``; it agrees with the Hamiltonian
``H`` of :func:`hamiltonian` when the shift vanishes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .background import BackgroundMetric
from .errors import ConstraintDriftError, DegenerateGeometryError
from .grid_core import Grid, divergence_u, integrate_slice, safe_det, safe_inv
from .worldvolume_geometry import spatial_metric, spatial_tangents

log = logging.getLogger(__name__)

#: lapse values at or below this are treated as a non-timelike evolution direction
LAPSE_THRESHOLD = 1e-12


@dataclass(frozen=True, eq=False)
class AdmSplit:
    lapse: np.ndarray   # N
    shift: np.ndarray   # N^A, shape (*s, p)
    eta: np.ndarray     # eta^mu, shape (*s, D)


@dataclass(frozen=True, eq=False)
class PhaseState:
    """One Cauchy slice ``(X^mu, phat_mu)`` of a brane."""

    X: np.ndarray
    phat: np.ndarray
    grid: Grid
    background: BackgroundMetric
    alpha: float = 1.0
    tau: float = 0.0
    winding: np.ndarray = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("tension alpha must be positive")
        X = np.asarray(self.X, dtype=float)
        phat = np.asarray(self.phat, dtype=float)
        expected = self.grid.shape + (self.background.dim,)
        if X.shape != expected or phat.shape != expected:
            raise ValueError(f"state arrays must have shape {expected}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "phat", phat)
        if self.winding is not None:
            object.__setattr__(self, "winding", np.asarray(self.winding, dtype=float).reshape(
                self.grid.p, self.background.dim))

    @property
    def D(self) -> int:
        return self.background.dim

    @property
    def eps(self) -> np.ndarray:
        return spatial_tangents(self.X, self.grid, self.winding)

    def metric(self) -> np.ndarray:
        return self.background.metric_at(self.X)

    def inverse_metric(self) -> np.ndarray:
        return self.background.inverse_at(self.X)

    def spatial_metric(self):
        return spatial_metric(self.eps, self.metric())

    def phat_up(self) -> np.ndarray:
        return np.einsum("...mn,...n->...m", self.inverse_metric(), self.phat)

    def with_arrays(self, X, phat, tau=None) -> "PhaseState":
        return replace(self, X=X, phat=phat, tau=self.tau if tau is None else tau)


@dataclass(frozen=True)
class GaugeChoice:
    """Prescription for lapse and shift.

    ``kind`` is one of

    * ``"temporal"``: lapse chosen so that ``X^0`` advances at unit rate
      (``X^0 = τ`` for slices of constant ``X^0``), shift ``N^A`` given,
    * ``"unit_lapse"``: ``N = 1`` (τ is proper time along eta), shift given,
    * ``"custom"``: lapse and shift given as constants or per-point arrays.
    """

    kind: str = "temporal"
    lapse: object = 1.0
    shift: object = 0.0

    def __post_init__(self):
        if self.kind not in ("temporal", "unit_lapse", "custom"):
            raise ValueError(f"unknown gauge kind {self.kind!r}")
        if self.kind == "custom" and np.any(np.asarray(self.lapse) <= 0):
            raise ValueError("custom gauge needs a positive lapse")

    def shift_field(self, grid: Grid) -> np.ndarray:
        s = np.asarray(self.shift, dtype=float)
        if s.ndim == 0:
            return np.full(grid.shape + (grid.p,), float(s))
        return np.broadcast_to(s, grid.shape + (grid.p,)).copy()


def adm_split(xdot, eps, h, g) -> AdmSplit:
    """Decompose ``Xdot = N eta + N^A eps_A``."""
    xdot = np.asarray(xdot, dtype=float)
    hinv = safe_inv(h, "spatial metric h_AB")
    g_xe = np.einsum("...m,...mn,...An->...A", xdot, g, eps)
    shift = np.einsum("...AB,...B->...A", hinv, g_xe)
    perp = xdot - np.einsum("...A,...Am->...m", shift, eps)
    norm2 = np.einsum("...m,...mn,...n->...", perp, g, perp)
    if np.any(norm2 >= 0) or np.any(np.sqrt(np.abs(norm2)) <= LAPSE_THRESHOLD):
        raise DegenerateGeometryError("evolution vector is not timelike (lapse <= threshold)")
    lapse = np.sqrt(-norm2)
    eta = perp / lapse[..., None]
    if np.any(eta[..., 0] < 0):
        raise DegenerateGeometryError("evolution vector is past-pointing")
    return AdmSplit(lapse=lapse, shift=shift, eta=eta)


def assemble_worldvolume_metric(split: AdmSplit, h, sqrt_h=None) -> np.ndarray:
    """ADM assembly of ``gamma_ab`` from lapse, shift and ``h_AB``."""
    N, NA = split.lapse, split.shift
    h = np.asarray(h, dtype=float)
    p = h.shape[-1]
    NA_low = np.einsum("...AB,...B->...A", h, NA)
    gamma = np.empty(h.shape[:-2] + (p + 1, p + 1))
    gamma[..., 0, 0] = -N**2 + np.einsum("...A,...A->...", NA, NA_low)
    gamma[..., 0, 1:] = NA_low
    gamma[..., 1:, 0] = NA_low
    gamma[..., 1:, 1:] = h
    if sqrt_h is None:
        sqrt_h = np.sqrt(np.linalg.det(h))
    sqrt_mg = np.sqrt(-np.linalg.det(gamma))
    if not np.allclose(sqrt_mg, N * sqrt_h, rtol=1e-12, atol=0):
        raise AssertionError("sqrt(-gamma) != N sqrt(h) in ADM assembly")
    return gamma


def unit_normal_from_velocity(X, grid: Grid, background: BackgroundMetric, velocity,
                              winding=None) -> np.ndarray:
    """Project a coordinate velocity field onto the slice normal inside the worldvolume."""
    eps = spatial_tangents(X, grid, winding)
    g = background.metric_at(X)
    h, _ = spatial_metric(eps, g)
    return adm_split(velocity, eps, h, g).eta


def canonical_momentum(X, eta, grid: Grid, background: BackgroundMetric, alpha: float = 1.0,
                       winding=None):
    """``phat_mu = -alpha sqrt(h) g_mu_nu eta^nu`` and the pointwise mass-shell residual.

    Returns ``(phat, residual)`` where ``residual = |p.p + alpha^2| / alpha^2``
    with ``p = phat / sqrt(h)``.
    """
    eps = spatial_tangents(X, grid, winding)
    g = background.metric_at(X)
    _, sqrt_h = spatial_metric(eps, g)
    phat = -alpha * sqrt_h[..., None] * np.einsum("...mn,...n->...m", g, eta)
    return phat, mass_shell_residual(phat, sqrt_h, background.inverse_at(X), alpha)


def mass_shell_residual(phat, sqrt_h, ginv, alpha: float) -> np.ndarray:
    p = phat / sqrt_h[..., None]
    return np.abs(np.einsum("...m,...mn,...n->...", p, ginv, p) + alpha**2) / alpha**2


def state_from_velocity(X, velocity, grid: Grid, background: BackgroundMetric,
                        alpha: float = 1.0, tau: float = 0.0, winding=None) -> PhaseState:
    """Initial data from an embedding slice and any future timelike velocity field."""
    eta = unit_normal_from_velocity(X, grid, background, velocity, winding)
    phat, _ = canonical_momentum(X, eta, grid, background, alpha, winding)
    return PhaseState(X=X, phat=phat, grid=grid, background=background, alpha=alpha, tau=tau,
                      winding=winding)


def constraints(state: PhaseState):
    """Pointwise ``F_0 = g^{mu nu} phat_mu phat_nu + alpha^2 det h`` and ``F_A = phat_mu eps_A^mu``."""
    eps = state.eps
    g = state.metric()
    h = np.einsum("...Am,...mn,...Bn->...AB", eps, g, eps)
    det_h = np.linalg.det(h)
    ginv = state.inverse_metric()
    F0 = np.einsum("...m,...mn,...n->...", state.phat, ginv, state.phat) + state.alpha**2 * det_h
    FA = np.einsum("...m,...Am->...A", state.phat, eps)
    return F0, FA


def constraint_norms(state: PhaseState) -> tuple:
    """Max ``|F_0|`` over ``alpha^2 det h`` and max ``|F_A|`` over ``alpha sqrt(h) |eps_A|``."""
    F0, FA = constraints(state)
    h, sqrt_h = state.spatial_metric()
    det_h = sqrt_h**2
    s0 = state.alpha**2 * np.max(det_h)
    sA = state.alpha * np.max(sqrt_h) * np.sqrt(np.max(np.diagonal(h, axis1=-2, axis2=-1)))
    return float(np.max(np.abs(F0)) / s0), float(np.max(np.abs(FA)) / sA)


def hamiltonian(state: PhaseState, lam, lamA) -> float:
    """``H = integral (lambda F_0 + lambda^A F_A)`` over the slice."""
    F0, FA = constraints(state)
    lam = np.broadcast_to(np.asarray(lam, dtype=float), F0.shape)
    lamA = np.broadcast_to(np.asarray(lamA, dtype=float), FA.shape)
    return float(integrate_slice(lam * F0 + np.einsum("...A,...A->...", lamA, FA), state.grid))


def multipliers_from_gauge(gauge: GaugeChoice, state: PhaseState):
    """Lagrange multipliers ``(lambda, lambda^A)`` plus the lapse and shift they encode.

    ``lambda = N / (2 alpha sqrt h)`` and ``lambda^A = N^A``.
    Returns ``(lam, lamA, lapse, shift)``.
    """
    grid = state.grid
    _, sqrt_h = state.spatial_metric()
    if np.any(sqrt_h <= 0):
        raise DegenerateGeometryError("sqrt(h) vanished")
    shift = gauge.shift_field(grid)
    if gauge.kind == "temporal":
        # Xdot^0 = 2 lambda P^0 + lambda^A eps_A^0 = 1 with P = -phat
        P0 = -state.phat_up()[..., 0]
        if np.any(P0 <= 0):
            raise DegenerateGeometryError("momentum is not future pointing; temporal gauge undefined")
        eps0 = state.eps[..., 0]
        lam = (1.0 - np.einsum("...A,...A->...", shift, eps0)) / (2.0 * P0)
        lapse = 2.0 * state.alpha * sqrt_h * lam
        if np.any(lapse <= LAPSE_THRESHOLD):
            raise DegenerateGeometryError("temporal gauge lapse is not positive")
    else:
        lapse = np.broadcast_to(np.asarray(gauge.lapse if gauge.kind == "custom" else 1.0,
                                           dtype=float), grid.shape).copy()
        lam = lapse / (2.0 * state.alpha * sqrt_h)
    return lam, shift.copy(), lapse, shift


def hamilton_rhs(state: PhaseState, gauge: GaugeChoice, multipliers=None):
    """``(Xdot^mu, d phat_mu / dτ)`` for the grid Hamiltonian."""
    if multipliers is None:
        lam, lamA, _, _ = multipliers_from_gauge(gauge, state)
    else:
        lam, lamA = multipliers[:2]
    grid, alpha = state.grid, state.alpha
    X, P = state.X, -state.phat
    eps = state.eps
    g = state.metric()
    ginv = state.inverse_metric()
    P_up = np.einsum("...mn,...n->...m", ginv, P)
    xdot = 2.0 * lam[..., None] * P_up + np.einsum("...A,...Am->...m", lamA, eps)

    h = np.einsum("...Am,...mn,...Bn->...AB", eps, g, eps)
    det_h = safe_det(h, "spatial metric h_AB")
    hinv = np.linalg.inv(h)
    eps_low = np.einsum("...Am,...mn->...An", eps, g)
    # v^B_mu = lambda det h h^{AB} eps_A mu ; dP/dτ gets + 2 alpha^2 d_B v^B_mu
    v = (lam * det_h)[..., None, None] * np.einsum("...AB,...Am->...Bm", hinv, eps_low)
    pdot = 2.0 * alpha**2 * divergence_u(v, grid)
    pdot += divergence_u(lamA[..., :, None] * P[..., None, :], grid)
    if not state.background.is_flat:
        dginv = state.background.dinverse_at(X)
        dg = state.background.dmetric_at(X)
        pdot -= lam[..., None] * np.einsum("...lmn,...m,...n->...l", dginv, P, P)
        pdot -= (alpha**2 * lam * det_h)[..., None] * np.einsum(
            "...AB,...lmn,...Am,...Bn->...l", hinv, dg, eps, eps)
    return xdot, -pdot


@dataclass
class Trajectory:
    """Sequence of phase states produced by :func:`evolve`."""

    taus: np.ndarray
    X: np.ndarray
    phat: np.ndarray
    grid: Grid
    background: BackgroundMetric
    alpha: float
    winding: np.ndarray = None
    diagnostics: list = field(default_factory=list)
    truncated: bool = False
    truncation_reason: str = ""

    def __len__(self):
        return len(self.taus)

    def state(self, j: int) -> PhaseState:
        return PhaseState(X=self.X[j], phat=self.phat[j], grid=self.grid,
                          background=self.background, alpha=self.alpha,
                          tau=float(self.taus[j]), winding=self.winding)

    def states(self):
        return [self.state(j) for j in range(len(self))]


def _diagnostic_record(state: PhaseState, gauge: GaugeChoice) -> dict:
    f0, fa = constraint_norms(state)
    _, sqrt_h = state.spatial_metric()
    _, _, lapse, _ = multipliers_from_gauge(gauge, state)
    ms = mass_shell_residual(state.phat, sqrt_h, state.inverse_metric(), state.alpha)
    return {"tau": state.tau, "F0": f0, "FA": fa, "mass_shell": float(np.max(ms)),
            "min_lapse": float(np.min(lapse)), "min_sqrt_h": float(np.min(sqrt_h))}


def rk4_step(state: PhaseState, gauge: GaugeChoice, dtau: float) -> PhaseState:
    def rhs(X, phat, tau):
        return hamilton_rhs(state.with_arrays(X, phat, tau), gauge)

    X0, p0, t0 = state.X, state.phat, state.tau
    k1x, k1p = rhs(X0, p0, t0)
    k2x, k2p = rhs(X0 + 0.5 * dtau * k1x, p0 + 0.5 * dtau * k1p, t0 + 0.5 * dtau)
    k3x, k3p = rhs(X0 + 0.5 * dtau * k2x, p0 + 0.5 * dtau * k2p, t0 + 0.5 * dtau)
    k4x, k4p = rhs(X0 + dtau * k3x, p0 + dtau * k3p, t0 + dtau)
    X1 = X0 + dtau / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    p1 = p0 + dtau / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
    return state.with_arrays(X1, p1, t0 + dtau)


def evolve(initial: PhaseState, gauge: GaugeChoice, dtau: float, steps: int,
           constraint_ceiling: float = 1e-5, collapse_threshold: float = 1e-2,
           record_every: int = 1, monitor=None) -> Trajectory:
    """Classical RK4 evolution with per-step constraint monitoring.

    The run stops early, and reports a truncation, once ``min sqrt(h)`` falls
    below ``collapse_threshold`` times its initial value or the geometry
    degenerates.  Constraint drift past ``constraint_ceiling`` (relative, see
    :func:`constraint_norms`) raises :class:`ConstraintDriftError`.
    """
    if steps < 0 or not dtau > 0:
        raise ValueError("need dtau > 0 and steps >= 0")
    state = initial
    _, sqrt_h0 = state.spatial_metric()
    floor = collapse_threshold * float(np.min(sqrt_h0))
    taus, Xs, ps, diags = [state.tau], [state.X], [state.phat], [_diagnostic_record(state, gauge)]
    truncated, reason = False, ""
    for step in range(1, steps + 1):
        try:
            new = rk4_step(state, gauge, dtau)
            _, sqrt_h = new.spatial_metric()
            if np.min(sqrt_h) < floor:
                truncated, reason = True, (
                    f"collapse: min sqrt(h) = {np.min(sqrt_h):.3e} below threshold at τ = {new.tau:.6g}")
                break
            rec = _diagnostic_record(new, gauge)
        except DegenerateGeometryError as exc:
            truncated, reason = True, f"degenerate geometry at step {step}: {exc}"
            break
        if max(rec["F0"], rec["FA"]) > constraint_ceiling:
            diags.append(rec)
            raise ConstraintDriftError(
                f"constraint drift {max(rec['F0'], rec['FA']):.3e} exceeds ceiling "
                f"{constraint_ceiling:.1e} at τ = {new.tau:.6g}", diags)
        state = new
        if step % record_every == 0 or step == steps:
            taus.append(state.tau)
            Xs.append(state.X)
            ps.append(state.phat)
            diags.append(rec)
            if monitor is not None:
                monitor(state, rec)
    if truncated:
        log.info("evolution truncated: %s", reason)
    return Trajectory(taus=np.array(taus), X=np.array(Xs), phat=np.array(ps),
                      grid=initial.grid, background=initial.background, alpha=initial.alpha,
                      winding=initial.winding, diagnostics=diags, truncated=truncated,
                      truncation_reason=reason)
