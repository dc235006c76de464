"""Gauss-Bonnet canonical pair on string worldsheets.

Conventions fixed here:

* ``eps^{ab}`` has ``eps^{01} = +1/sqrt(-gamma)``, so ``sqrt(-gamma) eps^{ab}`` is the
  constant matrix ``[[0, 1], [-1, 0]]``.
* The zweibein is gauge fixed with ``l_0 = tau^a`` (unit future normal of the
  constant-τ slice) and ``l_1 = d_sigma / sqrt(gamma_{sigma sigma})``.
* The rotation covector is the spin connection
  ``rho_b = gamma_cd l_1^c nabla_b l_0^d``; a boost of the frame by ``theta``
  shifts it by ``d_b theta``.
* Connection coefficients ``C_b{}^c{}_d`` are half of the coordinate form of the
  frame connection ``sum_D (nabla_b l_D)^c theta^D_d``.  With this
  normalisation ``rho_b = C_b{}^c{}_d eps^d{}_c`` and ``C_b{}^c{}_d = eps^c{}_d rho_b / 2``.

Array layout: worldsheet fields have shape ``(T, n, ...)`` with worldsheet
indices last; ``C`` is stored as ``(..., b, c, d)`` with ``c`` the upper slot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .background import BackgroundMetric
from .errors import DegenerateGeometryError
from .grid_core import Grid, safe_inv
from .worldvolume_geometry import _d_worldvolume, build_frame, worldvolume_christoffel

ETA2 = np.diag([-1.0, 1.0])
# sqrt(-gamma) eps^{ab}
EPS_DENSITY = np.array([[0.0, 1.0], [-1.0, 0.0]])


def _require_string(grid: Grid) -> None:
    if grid.p != 1:
        raise ValueError(f"Gauss-Bonnet quantities are defined for strings (p=1), got p={grid.p}")


@dataclass(frozen=True, eq=False)
class Zweibein:
    l: np.ndarray        # l_A^a, shape (..., A, a)
    coframe: np.ndarray  # theta^A_a, shape (..., A, a)

    @property
    def orientation(self) -> np.ndarray:
        return np.sign(np.linalg.det(self.l))

    def metric_residual(self, gamma) -> float:
        """``max |gamma_ab l_A^a l_B^b - eta_AB|``."""
        g = np.einsum("...Aa,...ab,...Bb->...AB", self.l, gamma, self.l)
        return float(np.max(np.abs(g - ETA2)))


def _coframe(l, gamma):
    return np.einsum("AB,...Bb,...ba->...Aa", ETA2, l, gamma)


def zweibein(gamma) -> Zweibein:
    """Orthonormal worldsheet frame with ``l_0`` along the slice normal."""
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape[-2:] != (2, 2):
        raise ValueError("zweibein needs a 2x2 worldsheet metric")
    gi = safe_inv(gamma, "worldsheet metric")
    g00 = gi[..., 0, 0]
    g11 = gamma[..., 1, 1]
    if np.any(g00 >= 0) or np.any(g11 <= 0):
        raise DegenerateGeometryError("worldsheet metric does not have a spacelike σ-direction")
    l0 = -gi[..., :, 0] / np.sqrt(-g00)[..., None]
    l1 = np.zeros_like(l0)
    l1[..., 1] = 1.0 / np.sqrt(g11)
    l = np.stack([l0, l1], axis=-2)
    return Zweibein(l=l, coframe=_coframe(l, gamma))


def rotate_zweibein(zb: Zweibein, theta, gamma) -> Zweibein:
    """Local Lorentz boost of the frame by rapidity ``theta``."""
    ch, sh = np.cosh(theta)[..., None], np.sinh(theta)[..., None]
    l0, l1 = zb.l[..., 0, :], zb.l[..., 1, :]
    l = np.stack([ch * l0 + sh * l1, sh * l0 + ch * l1], axis=-2)
    return Zweibein(l=l, coframe=_coframe(l, gamma))


def epsilon_up(sqrt_mg) -> np.ndarray:
    return EPS_DENSITY / np.asarray(sqrt_mg)[..., None, None]


def epsilon_mixed(gamma, sqrt_mg) -> np.ndarray:
    """``eps^c{}_d = eps^{ce} gamma_ed``, shape ``(..., c, d)``."""
    return np.einsum("...ce,...ed->...cd", epsilon_up(sqrt_mg), gamma)


def frame_derivative(zb: Zweibein, gamma, grid: Grid) -> np.ndarray:
    """``nabla_b l_A^c`` with shape ``(T, n, A, b, c)``."""
    dl = _d_worldvolume(zb.l, grid)                        # (T, n, b, A, c): d_b l_A^c
    chris = worldvolume_christoffel(gamma, grid)           # (T, n, c, a, b)
    return np.einsum("...bAc->...Abc", dl) + np.einsum("...cbe,...Ae->...Abc", chris, zb.l)


def rotation_covector(zb: Zweibein, gamma, grid: Grid) -> np.ndarray:
    """Spin connection ``rho_b = gamma_cd l_1^c nabla_b l_0^d``."""
    _require_string(grid)
    nab = frame_derivative(zb, gamma, grid)
    return np.einsum("...cd,...c,...bd->...b", gamma, zb.l[..., 1, :], nab[..., 0, :, :])


def connection_coefficients(zb: Zweibein, gamma, grid: Grid) -> np.ndarray:
    """``C_b{}^c{}_d = 1/2 sum_D (nabla_b l_D)^c theta^D_d``, shape ``(..., b, c, d)``."""
    nab = frame_derivative(zb, gamma, grid)
    return 0.5 * np.einsum("...Dbc,...Dd->...bcd", nab, zb.coframe)


def rho_from_connection(conn, eps_mixed) -> np.ndarray:
    """``rho_b = C_b{}^c{}_d eps^d{}_c``."""
    return np.einsum("...bcd,...dc->...b", conn, eps_mixed)


def connection_from_rho(rho, eps_mixed) -> np.ndarray:
    """``C_b{}^c{}_d = eps^c{}_d rho_b / 2``."""
    return 0.5 * np.einsum("...cd,...b->...bcd", eps_mixed, rho)


def project_connection(conn, eps_mixed) -> np.ndarray:
    """Part of ``C`` along ``eps``; the round trip through ``rho`` reproduces it."""
    return connection_from_rho(rho_from_connection(conn, eps_mixed), eps_mixed)


@dataclass(frozen=True, eq=False)
class WorldsheetGeometry:
    gamma: np.ndarray
    gamma_inv: np.ndarray
    sqrt_mg: np.ndarray
    lapse: np.ndarray
    tau_low: np.ndarray
    zweibein: Zweibein
    rho: np.ndarray
    connection: np.ndarray
    grid: Grid

    @property
    def eps_mixed(self) -> np.ndarray:
        return epsilon_mixed(self.gamma, self.sqrt_mg)

    def canonical_pair(self):
        """``(p^b, q_b) = (sqrt(-gamma) eps^{ab} tau_a, rho_b)``."""
        p = np.einsum("ab,...a->...b", EPS_DENSITY, self.tau_low)
        return p, self.rho


def worldsheet_geometry(traj, grid: Grid, background: BackgroundMetric, winding=None,
                        theta=None) -> WorldsheetGeometry:
    """Worldsheet metric, gauge-fixed zweibein (optionally boosted by ``theta``) and connection."""
    _require_string(grid)
    frame = build_frame(traj, grid, background, None, winding)
    zb = zweibein(frame.gamma)
    if theta is not None:
        zb = rotate_zweibein(zb, np.asarray(theta, dtype=float), frame.gamma)
    lapse = 1.0 / np.sqrt(-frame.gamma_inv[..., 0, 0])
    tau_low = np.zeros(lapse.shape + (2,))
    tau_low[..., 0] = -lapse
    return WorldsheetGeometry(
        gamma=frame.gamma, gamma_inv=frame.gamma_inv, sqrt_mg=frame.sqrt_mg, lapse=lapse,
        tau_low=tau_low, zweibein=zb, rho=rotation_covector(zb, frame.gamma, grid),
        connection=connection_coefficients(zb, frame.gamma, grid), grid=grid)


@dataclass(frozen=True, eq=False)
class Deformation:
    """Finite-difference deformation ``(perturbed - base) / amplitude`` of worldsheet data."""

    base: WorldsheetGeometry
    perturbed: WorldsheetGeometry
    amplitude: float
    tag: str = "nearby-solution"

    def _d(self, name):
        return (getattr(self.perturbed, name) - getattr(self.base, name)) / self.amplitude

    @property
    def drho(self) -> np.ndarray:
        return self._d("rho")

    @property
    def dconnection(self) -> np.ndarray:
        return self._d("connection")

    @property
    def dp(self) -> np.ndarray:
        return (self.perturbed.canonical_pair()[0] - self.base.canonical_pair()[0]) / self.amplitude


def zero_deformation(base: WorldsheetGeometry) -> Deformation:
    return Deformation(base, base, 1.0, tag="zero")


def frame_gauge_deformation(base: WorldsheetGeometry, theta, amplitude: float = 1e-4) -> Deformation:
    """Pure frame boost by ``amplitude * theta`` with the embedding unchanged."""
    zb = rotate_zweibein(base.zweibein, amplitude * np.asarray(theta, dtype=float), base.gamma)
    rotated = WorldsheetGeometry(
        gamma=base.gamma, gamma_inv=base.gamma_inv, sqrt_mg=base.sqrt_mg, lapse=base.lapse,
        tau_low=base.tau_low, zweibein=zb, rho=rotation_covector(zb, base.gamma, base.grid),
        connection=connection_coefficients(zb, base.gamma, base.grid), grid=base.grid)
    return Deformation(base, rotated, amplitude, tag="frame-gauge")


def gb_potential_route_rho(d: Deformation) -> np.ndarray:
    """``Psi^a = sqrt(-gamma) eps^{ab} delta rho_b``."""
    return np.einsum("ab,...b->...a", EPS_DENSITY, d.drho)


def gb_potential_route_connection(d: Deformation, beta: float = 1.0, reading: str = "a") -> np.ndarray:
    """``Psi^a = sqrt(-gamma) beta [gamma^{cd} dC_c{}^a{}_d - gamma^{ab} T_b]``.

    ``T_b`` is the trace in the second term: reading ``"a"`` contracts the
    derivative slot with the upper index (``dC_c{}^c{}_b``), reading ``"b"``
    contracts the last lower slot with it (``dC_b{}^c{}_c``).
    """
    g = d.base
    dC = d.dconnection
    first = np.einsum("...cd,...cad->...a", g.gamma_inv, dC)
    if reading == "a":
        trace = np.einsum("...ccb->...b", dC)
    elif reading == "b":
        trace = np.einsum("...bcc->...b", dC)
    else:
        raise ValueError(f"unknown trace reading {reading!r}; use 'a' or 'b'")
    second = np.einsum("...ab,...b->...a", g.gamma_inv, trace)
    return beta * g.sqrt_mg[..., None] * (first - second)


def route_comparison(d: Deformation, beta: float = 1.0, interior: int = 1) -> dict:
    """Least-squares proportionality ``Psi_connection = kappa Psi_rho`` and the relative mismatch.

    The first and last ``interior`` slices are dropped because their τ-stencils
    are one-sided.
    """
    sl = slice(interior, -interior if interior else None)
    psi_rho = gb_potential_route_rho(d)[sl]
    norm = float(np.sqrt(np.sum(psi_rho**2)))
    out = {"beta": beta, "norm_route_rho": norm}
    for reading in ("a", "b"):
        psi_conn = gb_potential_route_connection(d, beta, reading)[sl]
        kappa = float(np.sum(psi_conn * psi_rho) / np.sum(psi_rho**2)) if norm else float("nan")
        rel = float(np.sqrt(np.sum((psi_conn / beta - psi_rho) ** 2)) / norm) if norm else float("nan")
        out[f"kappa_{reading}"] = kappa
        out[f"relative_error_{reading}"] = rel
    return out


def gb_symplectic_eval(d1: Deformation, d2: Deformation, slice_index: int) -> float:
    """``sum_sigma dsigma [dp1^b drho2_b - dp2^b drho1_b]`` on one slice."""
    grid = d1.base.grid
    T = d1.drho.shape[0]
    if not -T <= slice_index < T:
        raise IndexError(f"slice {slice_index} out of range for {T} slices")
    j = slice_index
    dens = (np.einsum("...b,...b->...", d1.dp[j], d2.drho[j])
            - np.einsum("...b,...b->...", d2.dp[j], d1.drho[j]))
    return float(dens.sum() * grid.measure)


def gb_slice_independence(d1: Deformation, d2: Deformation, slices=None, floor: float = 1e-10) -> dict:
    """Spread of ``omega_GB`` across slices; values below ``floor`` count as degenerate."""
    T = d1.drho.shape[0]
    slices = range(1, T - 1) if slices is None else slices
    values = np.array([gb_symplectic_eval(d1, d2, j) for j in slices])
    scale = float(np.max(np.abs(values)))
    if scale <= floor:
        return {"deviation": float("nan"), "degenerate": True, "values": values}
    return {"deviation": float((values.max() - values.min()) / scale), "degenerate": False,
            "values": values}
