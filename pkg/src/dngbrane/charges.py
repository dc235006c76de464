"""Poincaré charges of a brane in flat spacetime.

Signs follow the momentum formula ``P^mu = -alpha int sqrt(h) eta^mu``,
so the time component is negative for future-pointing motion; ``energy``
reports ``-P^0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adm_dynamics import GaugeChoice, PhaseState, multipliers_from_gauge
from .errors import BackgroundError
from .grid_core import integrate_slice
from .worldvolume_geometry import WorldvolumeFrame, frame_from_tangents

ROUTE_TOLERANCE = 1e-10


def _require_flat(background) -> None:
    if not background.is_flat:
        raise BackgroundError("Poincaré charges are only defined on the Minkowski background")


@dataclass(frozen=True, eq=False)
class ChargeSet:
    P: np.ndarray           # total momentum P^mu
    M: np.ndarray           # total angular momentum M^{alpha beta}
    tau: float = 0.0
    P_density: np.ndarray = None
    M_density: np.ndarray = None

    @property
    def energy(self) -> float:
        return float(-self.P[0])


def frame_from_state(state: PhaseState, gauge: GaugeChoice = None) -> WorldvolumeFrame:
    """Worldvolume frame of a single phase state, with ``e_0 = N eta + N^A eps_A``.

    ``eta`` is read off the momentum, ``eta^mu = -phat^mu / (alpha sqrt h)``.
    """
    gauge = gauge or GaugeChoice()
    _, sqrt_h = state.spatial_metric()
    eta = -state.phat_up() / (state.alpha * sqrt_h[..., None])
    _, _, lapse, shift = multipliers_from_gauge(gauge, state)
    eps = state.eps
    e0 = lapse[..., None] * eta + np.einsum("...A,...Am->...m", shift, eps)
    e = np.concatenate([e0[..., None, :], eps], axis=-2)
    return frame_from_tangents(e, state.metric())


def momentum_density(frame: WorldvolumeFrame, alpha: float) -> np.ndarray:
    """``P^{a mu} = -alpha sqrt(-gamma) e^{a mu}``, shape ``(..., a, mu)``."""
    return -alpha * frame.sqrt_mg[..., None, None] * frame.e_up


def oriented_surface_element(frame: WorldvolumeFrame) -> np.ndarray:
    """Covector ``dSigma_a / d^p u``: ``tau_a`` times the invariant slice measure ``d^p u / N``.

    With ``tau_a = -N delta^0_a`` this is ``-delta^0_a``.
    """
    return frame.tau_low * np.sqrt(-frame.gamma_inv[..., 0, 0])[..., None]


def total_momentum(state: PhaseState, gauge: GaugeChoice = None, frame=None,
                   check_routes: bool = True):
    """Total momentum via the ADM route, cross-checked against two other routes.

    Returns ``(P, routes)`` where ``routes`` maps route names to their values:
    ``"adm"`` (``-alpha int sqrt(h) eta``), ``"worldvolume"`` (``int P^{a mu} dSigma_a``)
    and ``"canonical"`` (``int phat^mu``).
    """
    _require_flat(state.background)
    frame = frame or frame_from_state(state, gauge)
    grid = state.grid
    adm = -state.alpha * integrate_slice(frame.sqrt_h[..., None] * frame.eta, grid)
    dens = momentum_density(frame, state.alpha)
    wv = integrate_slice(np.einsum("...am,...a->...m", dens, oriented_surface_element(frame)), grid)
    canon = integrate_slice(state.phat_up(), grid)
    routes = {"adm": adm, "worldvolume": wv, "canonical": canon}
    if check_routes:
        scale = max(1.0, float(np.max(np.abs(adm))))
        worst = max(np.max(np.abs(adm - wv)), np.max(np.abs(adm - canon))) / scale
        if worst > ROUTE_TOLERANCE:
            raise AssertionError(f"momentum routes disagree by {worst:.3e} (frame inconsistency)")
    return adm, routes


def angular_momentum_density(frame: WorldvolumeFrame, X, alpha: float) -> np.ndarray:
    """``M^{a beta alpha} = 1/2 [P^{a beta} X^alpha - P^{a alpha} X^beta]``, shape ``(..., a, beta, alpha)``."""
    P = momentum_density(frame, alpha)
    X = np.asarray(X, dtype=float)
    term = np.einsum("...ab,...c->...abc", P, X)
    return 0.5 * (term - np.swapaxes(term, -1, -2))


def total_angular_momentum(state: PhaseState) -> np.ndarray:
    """``M^{alpha beta} = int (phat^beta X^alpha - phat^alpha X^beta)``."""
    _require_flat(state.background)
    pu = state.phat_up()
    dens = np.einsum("...a,...b->...ab", state.X, pu)
    return integrate_slice(dens - np.swapaxes(dens, -1, -2), state.grid)


def angular_momentum_from_density(frame: WorldvolumeFrame, state: PhaseState) -> np.ndarray:
    """Contract the density with ``dSigma_a``; the half in the density is restored.

    ``int M^{a beta alpha} dSigma_a`` equals one half of ``M^{alpha beta}``, so
    the result is transposed back to ``(alpha, beta)`` order.
    """
    dens = angular_momentum_density(frame, state.X, state.alpha)
    contracted = np.einsum("...abc,...a->...cb", dens, oriented_surface_element(frame))
    return 2.0 * integrate_slice(contracted, state.grid)


def charges(state: PhaseState, gauge: GaugeChoice = None) -> ChargeSet:
    frame = frame_from_state(state, gauge)
    P, _ = total_momentum(state, gauge, frame)
    return ChargeSet(P=P, M=total_angular_momentum(state), tau=state.tau,
                     P_density=momentum_density(frame, state.alpha),
                     M_density=angular_momentum_density(frame, state.X, state.alpha))


def conservation_monitor(trajectory) -> dict:
    """Maximum drift of ``P^mu`` and ``M^{alpha beta}`` from their initial values.

    Relative drifts use the energy for ``P`` and ``max(max|M(0)|, E * extent)``
    for ``M``, where ``extent`` is the largest spatial distance of the initial
    slice from its centroid; this keeps the ratio meaningful when ``M``
    vanishes by symmetry.
    """
    states = trajectory.states() if hasattr(trajectory, "states") else list(trajectory)
    if len(states) < 3:
        raise ValueError("conservation monitoring needs at least 3 slices")
    Ps, Ms = [], []
    for s in states:
        _require_flat(s.background)
        Ps.append(integrate_slice(s.phat_up(), s.grid))
        Ms.append(total_angular_momentum(s))
    Ps, Ms = np.array(Ps), np.array(Ms)
    dP = np.max(np.abs(Ps - Ps[0]))
    dM = np.max(np.abs(Ms - Ms[0]))
    energy = abs(Ps[0][0])
    X0 = states[0].X[..., 1:]
    centroid = X0.reshape(-1, X0.shape[-1]).mean(axis=0)
    extent = float(np.max(np.linalg.norm(X0 - centroid, axis=-1)))
    m_scale = max(float(np.max(np.abs(Ms[0]))), energy * extent)
    return {"P_drift": float(dP), "M_drift": float(dM),
            "P_drift_rel": float(dP / energy) if energy else float("nan"),
            "M_drift_rel": float(dM / m_scale) if m_scale else float("nan"),
            "P": Ps, "M": Ms, "taus": np.array([s.tau for s in states])}
