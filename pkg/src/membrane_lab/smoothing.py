"""Low-pass smoothing operators and numerical checks of their tame bounds.

The cutoff is a sharp projector onto cosine modes: each spatial axis is
transformed with the orthonormal DCT-II, modes with angular wavenumber
``pi j / (n dx)`` above ``N`` are zeroed, and the inverse transform is
applied.  An orthonormal real transform makes the operator an exact
orthogonal projector, so it is idempotent and never raises the discrete
L2 norm.  The even extension implied by the cosine basis avoids the jump
that a periodic transform would see at the box edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dctn, idctn
from scipy.ndimage import gaussian_filter1d

from .grid import MAX_SOBOLEV_ORDER, Grid, SpaceTimeField, sobolev_norm

__all__ = ["lowpass", "mode_wavenumbers", "cutoff_mask", "estimate_check", "EstimateReport", "SmoothingSchedule"]


def mode_wavenumbers(grid: Grid) -> np.ndarray:
    """Angular wavenumber of each cosine mode along one axis."""
    return np.pi * np.arange(grid.points) / (grid.points * grid.spacing)


def cutoff_mask(grid: Grid, N: float) -> np.ndarray:
    """Boolean mask over mode indices kept by the cutoff at ``N``.

    Every axis is cut separately, so the kept set is a box in mode space.
    """
    keep = mode_wavenumbers(grid) <= N
    mask = np.ones(grid.shape, dtype=bool)
    for k in range(grid.dim):
        shape = [1] * grid.dim
        shape[k] = grid.points
        mask = mask & keep.reshape(shape)
    return mask


def lowpass(u, N: float, grid: Grid | None = None, *, time_smoothing: bool = True):
    """Apply the cutoff at wavenumber ``N`` to a field or a space-time field.

    For a :class:`SpaceTimeField` every time slice is filtered and, unless
    ``time_smoothing`` is off, the result is also convolved in time with a
    Gaussian of standard deviation ``1/N`` (edge values repeated).
    """
    if not N > 0:
        raise ValueError(f"cutoff must be positive, got {N}")
    if isinstance(u, SpaceTimeField):
        out = _spatial_lowpass(u.values, N, u.grid)
        if time_smoothing:
            sigma = 1.0 / (N * u.dt)
            out = gaussian_filter1d(out, sigma, axis=0, mode="nearest", truncate=4.0)
        return u.with_values(out)
    if grid is None:
        raise ValueError("a grid is required for plain arrays")
    return _spatial_lowpass(np.asarray(u, dtype=float), N, grid)


def _spatial_lowpass(values: np.ndarray, N: float, grid: Grid) -> np.ndarray:
    axes = tuple(range(values.ndim - grid.dim, values.ndim))
    if values.shape[values.ndim - grid.dim:] != grid.shape:
        raise ValueError(f"trailing shape {values.shape} does not match grid {grid.shape}")
    coef = dctn(values, type=2, axes=axes, norm="ortho")
    coef = coef * cutoff_mask(grid, N)
    return idctn(coef, type=2, axes=axes, norm="ortho")


@dataclass
class EstimateReport:
    """Ratios of the smoothing and approximation bounds at one cutoff.

    ``smoothing = ||P u||_{s1} / (N^(s1-s2) ||u||_{s2})`` and
    ``approximation = N^(s1-s2) ||u - P u||_{s2} / ||u||_{s1}``.
    """

    N: float
    s1: int
    s2: int
    smoothing: float
    approximation: float
    note: str = ""


def estimate_check(u: np.ndarray, N: float, s1: int, s2: int, grid: Grid) -> EstimateReport:
    """Measure both tame-bound ratios for the cutoff at ``N``.

    A zero field gives zero ratios with a note rather than dividing by zero.
    """
    if not (isinstance(s1, (int, np.integer)) and isinstance(s2, (int, np.integer))):
        raise ValueError("Sobolev orders must be integers")
    if not 0 <= s2 <= s1:
        raise ValueError(f"need 0 <= s2 <= s1, got s1={s1}, s2={s2}")
    if s1 > MAX_SOBOLEV_ORDER:
        raise ValueError(f"order {s1} exceeds the supported maximum {MAX_SOBOLEV_ORDER}")
    u = grid.check(np.asarray(u, dtype=float), "u")
    pu = lowpass(u, N, grid)
    n_s1 = sobolev_norm(u, grid, s1)
    n_s2 = sobolev_norm(u, grid, s2)
    if n_s1 == 0.0 or n_s2 == 0.0:
        return EstimateReport(N, s1, s2, 0.0, 0.0, "zero field")
    gain = float(N) ** (s1 - s2)
    smooth = sobolev_norm(pu, grid, s1) / (gain * n_s2)
    approx = gain * sobolev_norm(u - pu, grid, s2) / n_s1
    return EstimateReport(N, s1, s2, float(smooth), float(approx))


@dataclass(frozen=True)
class SmoothingSchedule:
    """Geometric cutoff sequence ``N_m = N0^m`` for ``m = 0 .. m_max``."""

    N0: float
    m_max: int

    def __post_init__(self):
        if not self.N0 > 1:
            raise ValueError(f"N0 must exceed 1, got {self.N0}")
        if self.m_max < 0:
            raise ValueError("m_max must be nonnegative")

    def N(self, m: int) -> float:
        if not 0 <= m <= self.m_max:
            raise IndexError(f"step {m} outside 0..{self.m_max}")
        return float(self.N0) ** m

    def __iter__(self):
        return (self.N(m) for m in range(self.m_max + 1))

    def __len__(self):
        return self.m_max + 1
