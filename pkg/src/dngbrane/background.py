"""Fixed background spacetimes: metric evaluation, inverse and Christoffel symbols."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BackgroundError, SignatureError
from .grid_core import safe_inv


def minkowski_metric(dim: int) -> np.ndarray:
    eta = np.eye(dim)
    eta[0, 0] = -1.0
    return eta


def _check_signature(g: np.ndarray, where: str = "") -> None:
    g = np.asarray(g, dtype=float)
    if not np.allclose(g, np.swapaxes(g, -1, -2), rtol=0, atol=1e-12 * max(1.0, np.abs(g).max())):
        raise SignatureError(f"metric not symmetric{where}")
    ev = np.linalg.eigvalsh(g)
    neg = np.count_nonzero(ev < 0, axis=-1)
    zero = np.count_nonzero(np.abs(ev) <= 1e-14 * np.abs(ev).max(axis=-1, keepdims=True), axis=-1)
    if np.any(neg != 1) or np.any(zero):
        raise SignatureError(f"metric is not Lorentzian (-,+,...,+){where}")


@dataclass(frozen=True, eq=False)
class BackgroundMetric:
    """Background ``{M, g_mu_nu}`` given by a vectorized evaluator.

    ``evaluator`` maps points of shape ``(..., dim)`` to metrics of shape
    ``(..., dim, dim)``.  Lorentzian signature is validated on ``sample_points``
    at construction; this is a spot check, not a proof.
    """

    dim: int
    evaluator: Callable
    kind: str = "general"
    name: str = "custom"
    fd_step: float = 1e-5
    coordinate_scale: float = 1.0
    params: tuple = ()
    sample_points: np.ndarray = None

    def __post_init__(self):
        if self.kind not in ("minkowski", "general"):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.dim < 2:
            raise ValueError("background needs at least one space dimension")
        pts = self.sample_points
        if pts is None:
            rng = np.random.default_rng(0)
            pts = rng.uniform(-1.0, 1.0, size=(16, self.dim)) * self.coordinate_scale
            pts = np.vstack([np.zeros(self.dim), pts])
        _check_signature(self.evaluator(np.asarray(pts, dtype=float)), " at construction samples")

    @property
    def is_flat(self) -> bool:
        return self.kind == "minkowski"

    def metric_at(self, x, check: bool = False) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.is_flat:
            return np.broadcast_to(minkowski_metric(self.dim), x.shape[:-1] + (self.dim, self.dim))
        g = np.asarray(self.evaluator(x), dtype=float)
        if check:
            _check_signature(g, f" at x = {x.tolist() if x.ndim == 1 else 'sample'}")
        return g

    def inverse_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.is_flat:
            return np.broadcast_to(minkowski_metric(self.dim), x.shape[:-1] + (self.dim, self.dim))
        return safe_inv(self.metric_at(x), "background metric")

    def dmetric_at(self, x) -> np.ndarray:
        """``d_lam g_mu_nu`` with the derivative index first: shape ``(..., lam, mu, nu)``."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (self.dim,) * 3)
        if self.is_flat:
            return out
        h = self.fd_step * self.coordinate_scale
        for lam in range(self.dim):
            step = np.zeros(self.dim)
            step[lam] = h
            out[..., lam, :, :] = (self.evaluator(x + step) - self.evaluator(x - step)) / (2 * h)
        return out

    def christoffel_at(self, x) -> np.ndarray:
        """``Gamma^mu_{nu lam}`` of shape ``(..., mu, nu, lam)``; exact zeros for Minkowski."""
        x = np.asarray(x, dtype=float)
        if self.is_flat:
            return np.zeros(x.shape[:-1] + (self.dim,) * 3)
        ginv = self.inverse_at(x)
        dg = self.dmetric_at(x)  # [lam, rho, nu] = d_lam g_{rho nu}
        # lowered: Gamma_{rho nu lam} = 1/2 (d_nu g_{rho lam} + d_lam g_{rho nu} - d_rho g_{nu lam})
        low = 0.5 * (np.einsum("...nrl->...rnl", dg) + np.einsum("...lrn->...rnl", dg)
                     - dg)
        gam = np.einsum("...mr,...rnl->...mnl", ginv, low)
        return 0.5 * (gam + np.swapaxes(gam, -1, -2))

    def dinverse_at(self, x) -> np.ndarray:
        """``d_lam g^{mu nu}`` with the derivative index first."""
        x = np.asarray(x, dtype=float)
        if self.is_flat:
            return np.zeros(x.shape[:-1] + (self.dim,) * 3)
        ginv = self.inverse_at(x)
        return -np.einsum("...ms,...lsk,...kn->...lmn", ginv, self.dmetric_at(x), ginv)


def minkowski(dim: int = 4) -> BackgroundMetric:
    eta = minkowski_metric(dim)
    return BackgroundMetric(
        dim=dim,
        evaluator=lambda x: np.broadcast_to(eta, np.shape(x)[:-1] + (dim, dim)).copy(),
        kind="minkowski", name="minkowski")


def conformal(dim: int = 4, epsilon: float = 0.1, axis: int = 1,
              fd_step: float = 1e-5) -> BackgroundMetric:
    """Conformally flat metric ``Omega(x)^2 eta`` with ``Omega = 1 + epsilon * x^axis``."""
    if not 0 <= axis < dim:
        raise ValueError(f"conformal axis {axis} outside 0..{dim - 1}")
    eta = minkowski_metric(dim)

    def evaluator(x):
        x = np.asarray(x, dtype=float)
        omega = 1.0 + epsilon * x[..., axis]
        if np.any(omega == 0):
            raise SignatureError("conformal factor vanishes")
        return (omega**2)[..., None, None] * eta

    return BackgroundMetric(dim=dim, evaluator=evaluator, kind="general", name="conformal",
                            fd_step=fd_step, params=(("epsilon", epsilon), ("axis", axis)))


CATALOG = {
    "minkowski": minkowski,
    "conformal": conformal,
}


def from_name(name: str, dim: int = 4, **params) -> BackgroundMetric:
    try:
        factory = CATALOG[name]
    except KeyError:
        raise BackgroundError(
            f"unknown background {name!r}; available: {', '.join(sorted(CATALOG))}") from None
    return factory(dim, **params)
