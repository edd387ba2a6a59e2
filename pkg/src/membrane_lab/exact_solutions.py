"""Closed-form membranes and pointwise classifiers used as test oracles."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .grid import Grid, gradient, hessian, sobolev_norm

__all__ = [
    "HyperplaneParams",
    "CausalType",
    "hyperplane_field",
    "born_infeld_log",
    "lightlike_sphere",
    "classify_causal",
    "causal_margin",
    "eikonal_residual",
    "minimal_surface_residual",
    "minimal_surface_divergence",
    "born_infeld_residual",
    "bump_profile",
    "bump_initial_data",
]


@dataclass(frozen=True)
class HyperplaneParams:
    """Static hyperplane ``u_s(x) = A . x + B`` with nonzero slope ``A``.

    ``B`` is a scalar offset of the graph.
    """

    slope: tuple
    offset: float = 0.0

    def __post_init__(self):
        slope = tuple(float(a) for a in np.atleast_1d(self.slope))
        if not 1 <= len(slope) <= 3:
            raise ValueError(f"slope must have 1 to 3 components, got {len(slope)}")
        if not all(np.isfinite(slope)) or not np.isfinite(self.offset):
            raise ValueError("hyperplane parameters must be finite")
        if all(a == 0.0 for a in slope):
            raise ValueError("hyperplane slope must be nonzero")
        object.__setattr__(self, "slope", slope)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self) -> int:
        return len(self.slope)

    @property
    def slope_sq(self) -> float:
        return float(sum(a * a for a in self.slope))


class CausalType(IntEnum):
    SPACELIKE = -1
    LIGHTLIKE = 0
    TIMELIKE = 1


def hyperplane_field(params: HyperplaneParams, grid: Grid) -> np.ndarray:
    if params.dim != grid.dim:
        raise ValueError(f"slope has {params.dim} components, grid has dimension {grid.dim}")
    out = np.full(grid.shape, params.offset)
    for a, x in zip(params.slope, grid.coords):
        out = out + a * x
    return out


def born_infeld_log(k: float, T: float, t, x):
    """``k log((T - t + x) / (T - t - x))``, a travelling-front solution in 1-D."""
    if k == 0:
        raise ValueError("k must be nonzero")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(t < 0) or np.any(t >= T):
        raise ValueError("t must lie in [0, T)")
    r = T - t
    if np.any(np.abs(x) >= r):
        raise ValueError("need |x| < T - t")
    out = k * np.log((r + x) / (r - x))
    return out if out.ndim else float(out)


def lightlike_sphere(T: float, sign: int, t, x):
    """Shrinking sphere ``sign * sqrt((T-t)^2 - |x|^2)``.

    ``x`` holds points with the coordinates on its last axis; a scalar is a
    single 1-D point.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(t < 0) or np.any(t >= T):
        raise ValueError("t must lie in [0, T)")
    r2 = np.sum(x * x, axis=-1) if x.ndim else x * x
    rem = (T - t) ** 2 - r2
    if np.any(rem < 0):
        raise ValueError("point outside the shrinking ball")
    out = sign * (T - t) * np.sqrt(rem / (T - t) ** 2)
    return out if np.ndim(out) else float(out)


def causal_margin(u_t, grad_u) -> np.ndarray:
    """``1 + |grad u|^2 - u_t^2``."""
    u_t = np.asarray(u_t, dtype=float)
    return 1.0 + sum(np.asarray(g, dtype=float) ** 2 for g in grad_u) - u_t * u_t


def eikonal_residual(u_t, grad_u) -> np.ndarray:
    """``1 - u_t^2 + |grad u|^2``; zero on lightlike graphs."""
    return causal_margin(u_t, grad_u)


def classify_causal(u_t, grad_u, tol: float):
    """Return ``(types, margin)``; ``types`` holds :class:`CausalType` codes."""
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    margin = causal_margin(u_t, grad_u)
    types = np.where(margin > tol, CausalType.TIMELIKE, np.where(margin < -tol, CausalType.SPACELIKE, CausalType.LIGHTLIKE))
    return types.astype(np.int8), margin


def minimal_surface_residual(u: np.ndarray, grid: Grid) -> np.ndarray:
    """Polynomial form ``-(1 + |grad u|^2) lap u + grad u^T hess u grad u``.

    This is ``-(1 + |grad u|^2)^(3/2) div(grad u / sqrt(1 + |grad u|^2))``, so
    the zero sets agree; the second term is ``1/2 sum_k d_k u d_k |grad u|^2``.
    Values on all nodes, boundary rows use one-sided stencils.
    """
    u = grid.check(u, "u")
    g = gradient(u, grid)
    hs = hessian(u, grid)
    M = grid.dim
    lap = sum(hs[k][k] for k in range(M))
    g_sq = sum(gk * gk for gk in g)
    ghg = sum(g[k] * hs[k][i] * g[i] for k in range(M) for i in range(M))
    return -(1.0 + g_sq) * lap + ghg


def minimal_surface_divergence(u: np.ndarray, grid: Grid) -> np.ndarray:
    """Divergence form ``div(grad u / sqrt(1 + |grad u|^2))`` by nested differences."""
    u = grid.check(u, "u")
    g = gradient(u, grid)
    W = np.sqrt(1.0 + sum(gk * gk for gk in g))
    out = np.zeros_like(u)
    for k in range(grid.dim):
        out = out + gradient(g[k] / W, grid)[k]
    return out


def born_infeld_residual(u_t, u_x, u_tt, u_xx, u_tx):
    """1-D membrane residual ``u_tt (1 + u_x^2) - u_xx (1 - u_t^2) - 2 u_t u_x u_tx``."""
    return u_tt * (1.0 + u_x * u_x) - u_xx * (1.0 - u_t * u_t) - 2.0 * u_t * u_x * u_tx


def bump_profile(grid: Grid, radius: float = 1.0) -> np.ndarray:
    """``(1 - |x|^2 / radius^2)^4`` inside the ball, zero outside (C^3 across the rim)."""
    r2 = grid.radius**2 / radius**2
    return np.where(r2 < 1.0, (1.0 - np.minimum(r2, 1.0)) ** 4, 0.0)


def bump_initial_data(eps: float, grid: Grid, s: int = 2):
    """Compactly supported pair with ``||w0||_{H^{s+1}} + ||w1||_{H^s} = eps / 2``.

    Both components are multiples of :func:`bump_profile`; the velocity
    profile is the position profile at half the amplitude.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if grid.spacing >= 0.25:
        raise ValueError(f"grid spacing {grid.spacing:.3g} does not resolve the unit ball (need < 0.25)")
    if grid.half_width <= 1.0:
        raise ValueError("the box must contain the unit ball")
    b = bump_profile(grid)
    w0, w1 = b, 0.5 * b
    total = sobolev_norm(w0, grid, s + 1) + sobolev_norm(w1, grid, s)
    scale = 0.5 * eps / total
    return scale * w0, scale * w1
