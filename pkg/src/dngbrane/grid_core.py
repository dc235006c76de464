"""Periodic grids, centered differences, slice quadrature and small dense algebra.

Fields are plain numpy arrays whose leading axes are the spatial grid axes and
whose trailing axes hold components, e.g. an embedding slice of a membrane in
3+1 dimensions has shape ``(n1, n2, 4)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError, NonFiniteError

TWO_PI = 2.0 * np.pi

#: relative determinant threshold below which a small matrix counts as singular
DEGENERACY_THRESHOLD = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on the spatial coordinates ``u^A`` of a closed brane.

    Parameters
    ----------
    shape : tuple of int
        Points per spatial direction; ``len(shape)`` is the brane dimension p.
    lengths : tuple of float, optional
        Coordinate period per direction, default ``2*pi`` each.
    dtau : float
        Evolution step.
    offset : float
        Grid points sit at ``u_k = (k + offset) * du``; ``offset=0.5`` keeps
        samples off symmetry points such as the fold of a folded string.
    """

    shape: tuple
    lengths: tuple = None
    dtau: float = 1e-3
    offset: float = 0.0
    _spacing: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        shape = tuple(int(n) for n in np.atleast_1d(self.shape))
        if not shape or any(n <= 2 for n in shape):
            raise ValueError(f"grid needs at least 3 points per direction, got {shape}")
        if len(shape) > 2:
            raise ValueError("only p = 1 or p = 2 branes are supported")
        lengths = self.lengths
        if lengths is None:
            lengths = (TWO_PI,) * len(shape)
        lengths = tuple(float(x) for x in np.atleast_1d(lengths))
        if len(lengths) != len(shape):
            raise ValueError("lengths must match the number of grid directions")
        if any(x <= 0 for x in lengths):
            raise ValueError("grid lengths must be positive")
        if not self.dtau > 0:
            raise ValueError("dtau must be positive")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "_spacing", tuple(L / n for L, n in zip(lengths, shape)))

    @property
    def p(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> tuple:
        return self._spacing

    @property
    def measure(self) -> float:
        """Volume of one grid cell, ``prod(du)``."""
        return float(np.prod(self._spacing))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def axis(self, direction: int) -> np.ndarray:
        n, du = self.shape[direction], self._spacing[direction]
        return (np.arange(n) + self.offset) * du

    def coords(self) -> tuple:
        """Coordinate arrays ``u^A`` broadcast to the grid shape (``ij`` indexing)."""
        return tuple(np.meshgrid(*[self.axis(d) for d in range(self.p)], indexing="ij"))

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(tuple(n * factor for n in self.shape), self.lengths,
                    self.dtau / factor, self.offset)


def check_finite(values, name: str = "field") -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains non-finite entries")
    return arr


def partial_u(field, grid: Grid, direction: int, winding=None) -> np.ndarray:
    """Centered second-order derivative along spatial direction ``direction``.

    ``winding`` is the jump ``f(u + L) - f(u)`` across one period (shape of the
    component axes); it lets wound configurations such as an infinite straight
    string ``X^1 = u`` live on the periodic grid.
    """
    if not 0 <= direction < grid.p:
        raise IndexError(f"direction {direction} out of range for p = {grid.p}")
    f = np.asarray(field, dtype=float)
    diff = np.roll(f, -1, axis=direction) - np.roll(f, 1, axis=direction)
    if winding is not None:
        w = np.asarray(winding, dtype=float)
        if np.any(w):
            last = [slice(None)] * f.ndim
            first = [slice(None)] * f.ndim
            last[direction] = -1
            first[direction] = 0
            diff[tuple(last)] += w
            diff[tuple(first)] += w
    return diff / (2.0 * grid.spacing[direction])


def gradient_u(field, grid: Grid, winding=None) -> np.ndarray:
    """All spatial derivatives stacked on a new axis after the grid axes.

    ``winding`` has shape ``(p, *components)``.  Returns shape
    ``(*grid.shape, p, *components)``.
    """
    f = np.asarray(field, dtype=float)
    parts = []
    for d in range(grid.p):
        w = None if winding is None else np.asarray(winding)[d]
        parts.append(partial_u(f, grid, d, w))
    return np.stack(parts, axis=grid.p)


def divergence_u(vector_density, grid: Grid) -> np.ndarray:
    """``sum_A partial_A v^A`` for a periodic field with the A axis right after the grid axes."""
    v = np.asarray(vector_density, dtype=float)
    out = np.zeros(v.shape[: grid.p] + v.shape[grid.p + 1:])
    for d in range(grid.p):
        out += partial_u(np.take(v, d, axis=grid.p), grid, d)
    return out


def integrate_slice(density, grid: Grid) -> np.ndarray:
    """Periodic trapezoid (Riemann) sum over the spatial grid.

    Trailing component axes are kept, so a vector density integrates to a vector.
    """
    d = check_finite(density, "density")
    return d.sum(axis=tuple(range(grid.p))) * grid.measure


def d_tau(traj, dtau: float, index=None) -> np.ndarray:
    """First τ-derivative of a trajectory array (time on axis 0).

    Centered in the interior, one-sided second order at both ends.  With
    ``index`` given only that slice is returned.
    """
    f = np.asarray(traj, dtype=float)
    T = f.shape[0]
    if T < 3:
        raise ValueError("τ-derivatives need at least 3 slices")
    if index is not None:
        j = index % T
        if 0 < j < T - 1:
            return (f[j + 1] - f[j - 1]) / (2 * dtau)
        if j == 0:
            return (-3 * f[0] + 4 * f[1] - f[2]) / (2 * dtau)
        return (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * dtau)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2 * dtau)
    out[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * dtau)
    out[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * dtau)
    return out


def d2_tau(traj, dtau: float) -> np.ndarray:
    """Second τ-derivative; three-point interior stencil, four-point one-sided ends."""
    f = np.asarray(traj, dtype=float)
    if f.shape[0] < 4:
        raise ValueError("second τ-derivatives need at least 4 slices")
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / dtau**2
    out[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / dtau**2
    out[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / dtau**2
    return out


def _scale(m: np.ndarray) -> np.ndarray:
    dim = m.shape[-1]
    return np.max(np.abs(m), axis=(-2, -1)) ** dim


def safe_det(m, what: str = "matrix") -> np.ndarray:
    """Batched determinant that refuses near-singular matrices."""
    m = np.asarray(m, dtype=float)
    det = np.linalg.det(m)
    scale = _scale(m)
    bad = ~(np.abs(det) > DEGENERACY_THRESHOLD * np.maximum(scale, np.finfo(float).tiny))
    if np.any(bad):
        raise DegenerateGeometryError(
            f"{what} is degenerate at {int(np.count_nonzero(bad))} point(s) "
            f"(min |det| = {np.min(np.abs(det)):.3e})")
    return det


def safe_inv(m, what: str = "matrix") -> np.ndarray:
    """Batched inverse guarded by the degeneracy threshold."""
    safe_det(m, what)
    return np.linalg.inv(np.asarray(m, dtype=float))
