"""Pullback geometry of a brane worldvolume sampled on a (τ, u) grid.

Trajectories are arrays of shape ``(T, *grid.shape, D)`` holding ``X^mu`` on
``T`` equally spaced τ-slices.  Index conventions for derived arrays:

* tangents ``e``: ``(..., a, mu)`` with ``a = 0`` the τ-direction,
* metrics: ``(..., a, b)``,
* normals: ``(..., i, mu)`` with upper spacetime index,
* extrinsic curvature: ``(..., a, b, i)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .background import BackgroundMetric
from .errors import DegenerateGeometryError
from .grid_core import Grid, d2_tau, d_tau, gradient_u, partial_u, safe_det, safe_inv


def spatial_tangents(X, grid: Grid, winding=None) -> np.ndarray:
    """``epsilon_A^mu = d_A X^mu`` on one slice, shape ``(*grid.shape, p, D)``."""
    return gradient_u(X, grid, winding)


def tangents(traj, grid: Grid, slice_index: int, winding=None):
    """``(Xdot^mu, epsilon_A^mu)`` on one slice of a trajectory."""
    traj = np.asarray(traj, dtype=float)
    xdot = d_tau(traj, grid.dtau, slice_index)
    eps = spatial_tangents(traj[slice_index], grid, winding)
    _check_spatial(eps)
    return xdot, eps


def worldvolume_tangents(traj, grid: Grid, winding=None) -> np.ndarray:
    """``e_a^mu`` on every slice: shape ``(T, *grid.shape, p + 1, D)``."""
    traj = np.asarray(traj, dtype=float)
    xdot = d_tau(traj, grid.dtau)
    eps = np.stack([spatial_tangents(x, grid, winding) for x in traj])
    return np.concatenate([xdot[..., None, :], eps], axis=-2)


def _check_spatial(eps) -> None:
    h = np.einsum("...am,...bm->...ab", eps, eps)  # Euclidean Gram, only for rank
    safe_det(h, "spatial tangent set")


def spatial_metric(eps, g):
    """``h_AB = g(epsilon_A, epsilon_B)`` and ``sqrt(det h)``."""
    h = np.einsum("...am,...mn,...bn->...ab", eps, g, eps)
    det = safe_det(h, "spatial metric h_AB")
    if np.any(det <= 0):
        raise DegenerateGeometryError("spatial metric is not positive definite")
    return h, np.sqrt(det)


def induced_metrics(e, g):
    """Worldvolume and slice metrics from tangents ``e`` (τ-direction first).

    Returns ``(gamma_ab, h_AB, sqrt(-gamma), sqrt(h))``.
    """
    e = np.asarray(e, dtype=float)
    gamma = np.einsum("...am,...mn,...bn->...ab", e, g, e)
    det_gamma = safe_det(gamma, "worldvolume metric")
    if np.any(det_gamma >= 0):
        raise DegenerateGeometryError("worldvolume is not timelike (det gamma >= 0)")
    h = gamma[..., 1:, 1:]
    det_h = safe_det(h, "spatial metric h_AB")
    if np.any(det_h <= 0):
        raise DegenerateGeometryError("slice is not spacelike (det h <= 0)")
    return gamma, h, np.sqrt(-det_gamma), np.sqrt(det_h)


def normal_frame(e, g) -> np.ndarray:
    """Orthonormal normals ``n_i^mu`` by Gram-Schmidt over the ambient coordinate axes.

    At each step the axis with the largest remaining normal component is taken
    (ties go to the lowest index), which keeps the construction deterministic
    and well conditioned at every point.
    """
    e = np.asarray(e, dtype=float)
    g = np.asarray(g, dtype=float)
    D, k = e.shape[-1], e.shape[-2]
    m = D - k
    if m <= 0:
        raise ValueError(f"no normal directions: ambient dimension {D}, worldvolume dimension {k}")
    gam = np.einsum("...am,...mn,...bn->...ab", e, g, e)
    gi = safe_inv(gam, "worldvolume metric")
    seeds = np.broadcast_to(np.eye(D), e.shape[:-2] + (D, D))
    ge = np.einsum("...bm,...mn->...bn", e, g)
    coeff = np.einsum("...ab,...bn,...sn->...sa", gi, ge, seeds)
    r = seeds - np.einsum("...sa,...am->...sm", coeff, e)
    normals = []
    for _ in range(m):
        norms = np.einsum("...sm,...mn,...sn->...s", r, g, r)
        idx = np.argmax(norms, axis=-1)
        best = np.take_along_axis(norms, idx[..., None], axis=-1)[..., 0]
        if np.any(best <= 1e-24):
            raise DegenerateGeometryError("could not complete the normal frame")
        chosen = np.take_along_axis(r, idx[..., None, None], axis=-2)[..., 0, :]
        n = chosen / np.sqrt(best)[..., None]
        normals.append(n)
        proj = np.einsum("...sm,...mn,...n->...s", r, g, n)
        r = r - proj[..., None] * n[..., None, :]
    return np.stack(normals, axis=-2)


def slice_normal(gamma, e):
    """Unit future-pointing ``tau^a`` orthogonal (w.r.t. gamma) to the slice directions.

    Returns ``(tau^a, tau_a, lapse)`` with ``tau_a = -lapse * delta^0_a``
    for the future orientation.
    """
    gi = safe_inv(gamma, "worldvolume metric")
    g00 = gi[..., 0, 0]
    if np.any(g00 >= 0):
        raise DegenerateGeometryError("slice is not spacelike inside the worldvolume")
    lapse = 1.0 / np.sqrt(-g00)
    tau_up = -gi[..., :, 0] * lapse[..., None]
    eta0 = np.einsum("...a,...a->...", tau_up, e[..., :, 0])
    sign = np.where(eta0 >= 0, 1.0, -1.0)
    tau_up = tau_up * sign[..., None]
    tau_low = np.einsum("...ab,...b->...a", gamma, tau_up)
    return tau_up, tau_low, lapse


@dataclass(frozen=True, eq=False)
class WorldvolumeFrame:
    """Tangents, metrics, normals and slice normal on every point of a (set of) slice(s)."""

    e: np.ndarray
    g: np.ndarray
    gamma: np.ndarray
    gamma_inv: np.ndarray
    h: np.ndarray
    sqrt_mg: np.ndarray
    sqrt_h: np.ndarray
    normals: np.ndarray
    tau_up: np.ndarray
    tau_low: np.ndarray

    @property
    def eta(self) -> np.ndarray:
        """``eta^mu = tau^a e_a^mu``: unit timelike normal to the slice inside the worldvolume."""
        return np.einsum("...a,...am->...m", self.tau_up, self.e)

    @property
    def e_up(self) -> np.ndarray:
        """``e^{a mu} = gamma^{ab} e_b^mu``."""
        return np.einsum("...ab,...bm->...am", self.gamma_inv, self.e)

    @property
    def eps(self) -> np.ndarray:
        return self.e[..., 1:, :]


def frame_from_tangents(e, g) -> WorldvolumeFrame:
    gamma, h, sqrt_mg, sqrt_h = induced_metrics(e, g)
    normals = normal_frame(e, g)
    tau_up, tau_low, _ = slice_normal(gamma, e)
    return WorldvolumeFrame(e=np.asarray(e, float), g=np.asarray(g, float), gamma=gamma,
                            gamma_inv=np.linalg.inv(gamma), h=h, sqrt_mg=sqrt_mg, sqrt_h=sqrt_h,
                            normals=normals, tau_up=tau_up, tau_low=tau_low)


def build_frame(traj, grid: Grid, background: BackgroundMetric, slice_index=None,
                winding=None) -> WorldvolumeFrame:
    """Worldvolume frame on one slice (``slice_index``) or on all slices (``None``)."""
    traj = np.asarray(traj, dtype=float)
    if slice_index is None:
        e = worldvolume_tangents(traj, grid, winding)
        g = background.metric_at(traj)
    else:
        xdot, eps = tangents(traj, grid, slice_index, winding)
        e = np.concatenate([xdot[..., None, :], eps], axis=-2)
        g = background.metric_at(traj[slice_index])
    return frame_from_tangents(e, g)


def tangent_derivatives(traj, grid: Grid, winding=None) -> np.ndarray:
    """``d_a e_b^mu`` with the derivative index first, shape ``(T, *s, a, b, D)``.

    The mixed entries use independent stencils (``d_tau eps_A`` versus
    ``d_A Xdot``), so their difference measures discretisation error.
    """
    traj = np.asarray(traj, dtype=float)
    p = grid.p
    xdot = d_tau(traj, grid.dtau)
    xddot = d2_tau(traj, grid.dtau)
    eps = np.stack([spatial_tangents(x, grid, winding) for x in traj])  # (T,*s,p,D)
    deps_dtau = d_tau(eps, grid.dtau)
    T = traj.shape[0]
    out = np.empty(traj.shape[:-1] + (p + 1, p + 1, traj.shape[-1]))
    out[..., 0, 0, :] = xddot
    out[..., 0, 1:, :] = deps_dtau
    for A in range(p):
        # spatial axes of the per-slice arrays are 1..p once τ is axis 0
        out[..., A + 1, 0, :] = np.stack([partial_u(xdot[t], grid, A) for t in range(T)])
        for B in range(p):
            out[..., A + 1, B + 1, :] = np.stack(
                [partial_u(eps[t][..., B, :], grid, A) for t in range(T)])
    return out


@dataclass(frozen=True, eq=False)
class ExtrinsicCurvature:
    K_raw: np.ndarray   # before symmetrisation
    K: np.ndarray       # K_ab^i, symmetric in (a, b)
    mean: np.ndarray    # K^i = gamma^{ab} K_ab^i

    @property
    def antisymmetric_part(self) -> float:
        return float(np.max(np.abs(self.K_raw - np.swapaxes(self.K_raw, -2, -3)))) / 2


def _spacetime_covariant_tangent_derivative(traj, grid, background, e, winding):
    dde = tangent_derivatives(traj, grid, winding)
    if not background.is_flat:
        chris = background.christoffel_at(traj)
        dde = dde + np.einsum("...mnl,...an,...bl->...abm", chris, e, e)
    return dde


def extrinsic_curvature(traj, grid: Grid, background: BackgroundMetric, frame=None,
                        winding=None) -> ExtrinsicCurvature:
    """``K_ab^i = -n^i_mu (d_a e_b^mu + Gamma^mu_{nu lam} e_a^nu e_b^lam)`` on every slice."""
    traj = np.asarray(traj, dtype=float)
    if frame is None:
        frame = build_frame(traj, grid, background, None, winding)
    dde = _spacetime_covariant_tangent_derivative(traj, grid, background, frame.e, winding)
    n_low = np.einsum("...im,...mn->...in", frame.normals, frame.g)
    K_raw = -np.einsum("...in,...abn->...abi", n_low, dde)
    K = 0.5 * (K_raw + np.swapaxes(K_raw, -2, -3))
    mean = np.einsum("...ab,...abi->...i", frame.gamma_inv, K)
    return ExtrinsicCurvature(K_raw=K_raw, K=K, mean=mean)


def _d_worldvolume(field, grid: Grid):
    """Derivatives of a periodic per-point field along every worldvolume direction.

    ``field`` has τ on axis 0; result has a new axis after the grid axes.
    """
    field = np.asarray(field, dtype=float)
    T = field.shape[0]
    parts = [d_tau(field, grid.dtau)]
    for A in range(grid.p):
        parts.append(np.stack([partial_u(field[t], grid, A) for t in range(T)]))
    return np.stack(parts, axis=1 + grid.p)


def worldvolume_christoffel(gamma, grid: Grid) -> np.ndarray:
    """``Gamma^c_{ab}`` of the induced metric by finite differences, shape ``(..., c, a, b)``."""
    dgam = _d_worldvolume(gamma, grid)  # (T,*s, c, a, b) = d_c gamma_ab
    low = 0.5 * (np.einsum("...acb->...cab", dgam) + np.einsum("...bca->...cab", dgam)
                 - dgam)
    return np.einsum("...dc,...cab->...dab", np.linalg.inv(gamma), low)


def gauss_weingarten_residual(traj, grid: Grid, background: BackgroundMetric,
                              slice_index: int, winding=None) -> dict:
    """Residuals of both Gauss-Weingarten relations on one slice.

    Gauss: ``d_a e_b + Gamma(g) e_a e_b - Gamma^c_ab(gamma) e_c + K_ab^i n_i``.
    Weingarten (tangential part only): ``-(nabla_a P_T) n_i - K_ab^i e^b``,
    where ``P_T`` is the tangential projector; this is independent of how the
    normal frame is chosen.
    """
    traj = np.asarray(traj, dtype=float)
    frame = build_frame(traj, grid, background, None, winding)
    curv = extrinsic_curvature(traj, grid, background, frame, winding)
    dde = _spacetime_covariant_tangent_derivative(traj, grid, background, frame.e, winding)
    chris_wv = worldvolume_christoffel(frame.gamma, grid)
    gauss = (dde - np.einsum("...cab,...cm->...abm", chris_wv, frame.e)
             + np.einsum("...abi,...im->...abm", curv.K, frame.normals))

    e_up = frame.e_up
    proj = np.einsum("...am,...an->...mn", e_up, np.einsum("...an,...nk->...ak", frame.e, frame.g))
    dproj = _d_worldvolume(proj, grid)  # (..., a, mu, nu)
    if not background.is_flat:
        chris = background.christoffel_at(traj)
        dproj = (dproj + np.einsum("...mlr,...al,...rn->...amn", chris, frame.e, proj)
                 - np.einsum("...rln,...al,...mr->...amn", chris, frame.e, proj))
    wein = (-np.einsum("...amn,...in->...aim", dproj, frame.normals)
            - np.einsum("...abi,...bm->...aim", curv.K, e_up))
    j = slice_index
    g_res = float(np.max(np.abs(gauss[j])))
    w_res = float(np.max(np.abs(wein[j])))
    return {"gauss": g_res, "weingarten": w_res, "residual": max(g_res, w_res),
            "antisymmetric_K": float(np.max(np.abs(curv.K_raw[j] - np.swapaxes(curv.K_raw[j], -2, -3)))) / 2}
