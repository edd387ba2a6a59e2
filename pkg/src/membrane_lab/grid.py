"""Uniform Cartesian grids, finite-difference stencils and discrete norms.

Fields are plain :class:`numpy.ndarray` objects whose trailing ``grid.dim``
axes are the spatial axes.  Any leading axes (typically time) are carried
through untouched, so every stencil here works on a single time slice or on
a whole space-time block at once.

Stencils are second-order central differences in the interior and
second-order one-sided differences on the boundary nodes.  Both are exact on
polynomials of degree two per axis.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "Grid",
    "SpaceTimeField",
    "derivative",
    "second_derivative",
    "gradient",
    "laplacian",
    "mixed",
    "hessian",
    "diff_ops",
    "partial",
    "multi_indices",
    "sobolev_norm",
    "integrate_weighted",
    "integrate",
    "trapezoid_weights",
    "sponge_profile",
    "MAX_SOBOLEV_ORDER",
]

#: Largest Sobolev order supported by :func:`sobolev_norm`.  Repeated
#: application of the three- and four-point stencils stays well defined on
#: grids with at least 8 points per axis up to this order.
MAX_SOBOLEV_ORDER = 6


@dataclass(frozen=True)
class Grid:
    """Box ``[-L, L]^M`` sampled with ``n`` points per axis.

    Parameters
    ----------
    dim : int
        Spatial dimension ``M`` (1, 2 or 3).
    half_width : float
        Half side length ``L`` of the box.
    points : int
        Number of nodes per axis, boundary nodes included.
    sponge_width : int
        Number of outermost cells per side that form the absorbing layer.
    """

    dim: int = 1
    half_width: float = 10.0
    points: int = 128
    sponge_width: int = 0

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.points < 8:
            raise ValueError(f"need at least 8 points per axis, got {self.points}")
        if not self.half_width > 0:
            raise ValueError(f"half_width must be positive, got {self.half_width}")
        if self.sponge_width < 0 or 4 * self.sponge_width >= self.points:
            raise ValueError(
                f"sponge_width must satisfy 0 <= sponge_width < points/4, "
                f"got {self.sponge_width} for {self.points} points"
            )

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.points - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dim

    @property
    def size(self) -> int:
        return self.points**self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def volume(self) -> float:
        return (2.0 * self.half_width) ** self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        """1-D node coordinates shared by every axis."""
        return -self.half_width + self.spacing * np.arange(self.points)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Dense coordinate arrays, one per axis, each of shape ``grid.shape``."""
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def radius(self) -> np.ndarray:
        return np.sqrt(sum(x * x for x in self.coords))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def interior_mask(self, margin: int = 1) -> np.ndarray:
        """Boolean mask of nodes at least ``margin`` nodes away from the boundary."""
        mask = np.zeros(self.shape, dtype=bool)
        inner = tuple(slice(margin, self.points - margin) for _ in range(self.dim))
        mask[inner] = True
        return mask

    def box_mask(self, half_width: float) -> np.ndarray:
        """Nodes inside the sub-box ``[-half_width, half_width]^M``."""
        tol = 1e-12 * self.half_width
        return np.all([np.abs(x) <= half_width + tol for x in self.coords], axis=0)

    def check(self, values: np.ndarray, name: str = "field") -> np.ndarray:
        """Validate that the trailing axes of ``values`` match this grid."""
        values = np.asarray(values, dtype=float)
        if values.shape[values.ndim - self.dim :] != self.shape or values.ndim < self.dim:
            raise ValueError(
                f"{name} has shape {values.shape}, expected trailing axes {self.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError(f"{name} contains non-finite values")
        return values


@dataclass
class SpaceTimeField:
    """Samples on the lattice ``t_j = t0 + j*dt`` times the spatial grid.

    ``values`` has shape ``(n_t, *grid.shape)``.
    """

    grid: Grid
    dt: float
    values: np.ndarray
    t0: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[1:] != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not match (n_t, {self.grid.shape})"
            )
        if self.values.shape[0] < 2:
            raise ValueError("a space-time field needs at least two time levels")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("space-time field contains non-finite values")

    @property
    def n_t(self) -> int:
        return self.values.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_t)

    def __getitem__(self, index):
        return self.values[index]

    def copy(self) -> "SpaceTimeField":
        return SpaceTimeField(self.grid, self.dt, self.values.copy(), self.t0, dict(self.meta))

    def with_values(self, values: np.ndarray) -> "SpaceTimeField":
        return SpaceTimeField(self.grid, self.dt, values, self.t0)

    @classmethod
    def from_function(cls, fn, grid: Grid, dt: float, n_t: int, t0: float = 0.0):
        """Sample ``fn(t, *coords)`` on every time level."""
        times = t0 + dt * np.arange(n_t)
        values = np.stack([np.broadcast_to(fn(t, *grid.coords), grid.shape) for t in times])
        return cls(grid, dt, values, t0)


# ---------------------------------------------------------------------------
# stencils


def _axis(values: np.ndarray, grid: Grid, k: int) -> int:
    if not 0 <= k < grid.dim:
        raise IndexError(f"axis index {k} out of range for a {grid.dim}-D grid")
    return values.ndim - grid.dim + k


def _d1(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    f = np.moveaxis(f, axis, -1)
    out = np.empty_like(f)
    out[..., 1:-1] = (f[..., 2:] - f[..., :-2]) / (2.0 * h)
    out[..., 0] = (-3.0 * f[..., 0] + 4.0 * f[..., 1] - f[..., 2]) / (2.0 * h)
    out[..., -1] = (3.0 * f[..., -1] - 4.0 * f[..., -2] + f[..., -3]) / (2.0 * h)
    return np.moveaxis(out, -1, axis)


def _d2(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    f = np.moveaxis(f, axis, -1)
    out = np.empty_like(f)
    h2 = h * h
    out[..., 1:-1] = (f[..., 2:] - 2.0 * f[..., 1:-1] + f[..., :-2]) / h2
    out[..., 0] = (2.0 * f[..., 0] - 5.0 * f[..., 1] + 4.0 * f[..., 2] - f[..., 3]) / h2
    out[..., -1] = (2.0 * f[..., -1] - 5.0 * f[..., -2] + 4.0 * f[..., -3] - f[..., -4]) / h2
    return np.moveaxis(out, -1, axis)


def derivative(values: np.ndarray, grid: Grid, k: int) -> np.ndarray:
    """First derivative along spatial axis ``k``."""
    values = np.asarray(values, dtype=float)
    return _d1(values, _axis(values, grid, k), grid.spacing)


def second_derivative(values: np.ndarray, grid: Grid, k: int) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return _d2(values, _axis(values, grid, k), grid.spacing)


def gradient(values: np.ndarray, grid: Grid) -> list[np.ndarray]:
    return [derivative(values, grid, k) for k in range(grid.dim)]


def laplacian(values: np.ndarray, grid: Grid) -> np.ndarray:
    return sum(second_derivative(values, grid, k) for k in range(grid.dim))


def mixed(values: np.ndarray, grid: Grid, k: int, i: int) -> np.ndarray:
    """``d^2/dx_k dx_i``; the three-point second difference when ``k == i``.

    Off-diagonal entries are products of central first differences, which
    commute, so ``mixed(f, k, i)`` equals ``mixed(f, i, k)`` bit for bit.
    """
    if k == i:
        return second_derivative(values, grid, k)
    lo, hi = min(k, i), max(k, i)
    return derivative(derivative(values, grid, lo), grid, hi)


def hessian(values: np.ndarray, grid: Grid) -> list[list[np.ndarray]]:
    """Symmetric matrix of mixed derivatives (entries shared, not copied)."""
    M = grid.dim
    hess = [[None] * M for _ in range(M)]
    for k in range(M):
        for i in range(k, M):
            hess[k][i] = hess[i][k] = mixed(values, grid, k, i)
    return hess


def diff_ops(values: np.ndarray, grid: Grid, request):
    """Dispatch ``"gradient"``, ``"laplacian"`` or ``("mixed", k, i)``."""
    values = grid.check(values)
    if request == "gradient":
        return gradient(values, grid)
    if request == "laplacian":
        return laplacian(values, grid)
    if isinstance(request, tuple) and len(request) == 3 and request[0] == "mixed":
        _, k, i = request
        if not (0 <= k < grid.dim and 0 <= i < grid.dim):
            raise IndexError(f"mixed({k}, {i}) requested on a {grid.dim}-D grid")
        return mixed(values, grid, k, i)
    raise ValueError(f"unknown derivative request {request!r}")


def partial(values: np.ndarray, grid: Grid, alpha: tuple[int, ...]) -> np.ndarray:
    """Apply ``D^alpha``: pairs of orders use the second-difference stencil."""
    out = np.asarray(values, dtype=float)
    for k, order in enumerate(alpha):
        for _ in range(order // 2):
            out = second_derivative(out, grid, k)
        if order % 2:
            out = derivative(out, grid, k)
    return out


def multi_indices(dim: int, order: int):
    """All multi-indices ``alpha`` with ``|alpha| <= order``, in a fixed order."""
    for total in range(order + 1):
        for alpha in itertools.product(range(total + 1), repeat=dim):
            if sum(alpha) == total:
                yield alpha


# ---------------------------------------------------------------------------
# quadrature and norms


def trapezoid_weights(grid: Grid) -> np.ndarray:
    """Tensor-product trapezoid weights; they sum to the box volume."""
    w1 = np.full(grid.points, grid.spacing)
    w1[0] = w1[-1] = 0.5 * grid.spacing
    w = w1
    for _ in range(grid.dim - 1):
        w = np.multiply.outer(w, w1)
    return w


def integrate(values: np.ndarray, grid: Grid) -> np.ndarray | float:
    """Trapezoid integral over the spatial axes (leading axes are kept)."""
    values = np.asarray(values, dtype=float)
    w = trapezoid_weights(grid)
    axes = tuple(range(values.ndim - grid.dim, values.ndim))
    return np.sum(values * w, axis=axes)


def integrate_weighted(values: np.ndarray, weight: np.ndarray, grid: Grid) -> float:
    """``sum(weight * values * dx^M)`` with trapezoid end corrections."""
    values = grid.check(values, "field")
    weight = grid.check(weight, "weight")
    if values.shape != weight.shape:
        raise ValueError(f"field {values.shape} and weight {weight.shape} differ in shape")
    return float(integrate(values * weight, grid))


def sobolev_norm(values: np.ndarray, grid: Grid, s: int, mask: np.ndarray | None = None):
    """Discrete ``H^s`` norm summing every multi-index ``|alpha| <= s``.

    ``mask`` restricts the quadrature to a subset of nodes (derivatives are
    still taken on the full grid).  Leading axes are kept, so a space-time
    block yields one norm per time level.
    """
    if int(s) != s or s < 0:
        raise ValueError(f"Sobolev order must be a nonnegative integer, got {s}")
    s = int(s)
    if s > MAX_SOBOLEV_ORDER:
        raise ValueError(f"Sobolev order {s} exceeds supported maximum {MAX_SOBOLEV_ORDER}")
    values = np.asarray(values, dtype=float)
    w = trapezoid_weights(grid)
    if mask is not None:
        w = w * mask
    axes = tuple(range(values.ndim - grid.dim, values.ndim))
    total = 0.0
    for alpha in multi_indices(grid.dim, s):
        d = partial(values, grid, alpha)
        total = total + np.sum(d * d * w, axis=axes)
    return np.sqrt(total)


def sponge_profile(grid: Grid, strength: float = 4.0) -> np.ndarray:
    """Damping rate that ramps quadratically from 0 to ``strength`` across the layer.

    Zero everywhere when ``grid.sponge_width == 0``.  Solvers multiply time
    derivatives by ``exp(-profile * dt)`` each step.
    """
    sigma = np.zeros(grid.shape)
    width = grid.sponge_width
    if width == 0:
        return sigma
    idx = np.arange(grid.points)
    depth = np.maximum(width - idx, idx - (grid.points - 1 - width)).clip(min=0) / width
    ramp = strength * depth**2
    for k in range(grid.dim):
        shape = [1] * grid.dim
        shape[k] = grid.points
        sigma = sigma + ramp.reshape(shape)
    return sigma
