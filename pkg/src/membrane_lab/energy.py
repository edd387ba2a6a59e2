"""Weighted energies, weight admissibility and decay-rate fitting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import MAX_SOBOLEV_ORDER, Grid, gradient, integrate, partial

__all__ = [
    "WeightPair",
    "EnergyReport",
    "weighted_energy",
    "hs_energy",
    "weight_check",
    "decay_rate",
    "decay_constant",
    "gronwall_monitor",
    "energy_report",
]


@dataclass(frozen=True)
class WeightPair:
    """Time weights ``phi = a e^(-r t)`` and ``phibar = b e^(-rb t)``.

    The defaults ``a = 2, b = 1, r = rb = c`` are the standard exponential
    pair.  Derivatives are closed-form so that equality cases of the
    admissibility conditions hold exactly in floating point.
    """

    c: float = 1.5
    phi_amp: float = 2.0
    phi_rate: float | None = None
    bar_amp: float = 1.0
    bar_rate: float | None = None

    def __post_init__(self):
        if self.phi_amp <= 0 or self.bar_amp <= 0:
            raise ValueError("weights must be positive")
        if self.phi_rate is None:
            object.__setattr__(self, "phi_rate", float(self.c))
        if self.bar_rate is None:
            object.__setattr__(self, "bar_rate", float(self.c))

    def phi(self, t):
        return self.phi_amp * np.exp(-self.phi_rate * np.asarray(t, dtype=float))

    def phi_t(self, t):
        return -self.phi_rate * self.phi(t)

    def bar(self, t):
        return self.bar_amp * np.exp(-self.bar_rate * np.asarray(t, dtype=float))

    def bar_t(self, t):
        return -self.bar_rate * self.bar(t)

    def bar_tt(self, t):
        return self.bar_rate**2 * self.bar(t)


def _energy_density(h, v, grid):
    return v * v + h * h + sum(g * g for g in gradient(h, grid))


def weighted_energy(h: np.ndarray, v: np.ndarray, weights: WeightPair, t: float, grid: Grid) -> float:
    """``int phibar(t) (v^2 + |grad h|^2 + h^2) dx``."""
    h = grid.check(np.asarray(h, dtype=float), "h")
    v = grid.check(np.asarray(v, dtype=float), "v")
    return float(weights.bar(t) * integrate(_energy_density(h, v, grid), grid))


def hs_energy(h: np.ndarray, v: np.ndarray, weights: WeightPair, t: float, grid: Grid, s: int) -> float:
    """Weighted energy of the order-``s`` pure derivatives, summed over axes.

    ``s = 0`` is :func:`weighted_energy` (one term, not one per axis).
    """
    if not isinstance(s, (int, np.integer)) or s < 0:
        raise ValueError(f"order must be a nonnegative integer, got {s}")
    if s + 1 > MAX_SOBOLEV_ORDER:
        raise ValueError(f"order {s} unsupported (max {MAX_SOBOLEV_ORDER - 1})")
    if s == 0:
        return weighted_energy(h, v, weights, t, grid)
    h = grid.check(np.asarray(h, dtype=float), "h")
    v = grid.check(np.asarray(v, dtype=float), "v")
    total = 0.0
    for j in range(grid.dim):
        alpha = tuple(s if k == j else 0 for k in range(grid.dim))
        total += float(integrate(_energy_density(partial(h, grid, alpha), partial(v, grid, alpha), grid), grid))
    return float(weights.bar(t) * total)


def decay_constant(c: float, sigma: float, eps: float, c0: float = 10.0) -> float:
    """``min{c^2 s - c0 (s+1) e, c (c s - 1 - 5e), 2s + c^2 s - 1 - c0 e}`` with ``s = sigma``."""
    return min(
        c * c * sigma - c0 * (sigma + 1.0) * eps,
        c * (c * sigma - 1.0 - 5.0 * eps),
        2.0 * sigma + c * c * sigma - 1.0 - c0 * eps,
    )


def weight_check(
    weights: WeightPair,
    c: float,
    t_grid,
    *,
    sigma: float = 1.5,
    eps: float = 1e-2,
    c0: float = 10.0,
) -> dict:
    """Sample the weight conditions on ``t_grid``.

    Returns ``{"checks": {name: bool}, "margins": {name: worst slack},
    "decay_constant": C}``; a negative margin marks the failing condition.
    """
    if not c > 1:
        raise ValueError(f"c must exceed 1, got {c}")
    t = np.asarray(t_grid, dtype=float)
    phi, bar = weights.phi(t), weights.bar(t)
    C = decay_constant(c, sigma, eps, c0)
    margins = {
        "phi_decay": float(np.min(-(weights.phi_t(t) + c * phi))),
        "bar_decay": float(np.min(-(weights.bar_t(t) + c * bar))),
        "bar_convex": float(np.min(weights.bar_tt(t) - c * c * bar)),
        "bar_below_phi": float(np.min(phi - c * bar)),
        # phibar^-1 e^(-C t) <= e^(-eps t), compared in logarithms
        "decay_budget": float(np.min(-eps * t + np.log(bar) + C * t)),
    }
    return {"checks": {k: v >= 0.0 for k, v in margins.items()}, "margins": margins, "decay_constant": C}


def decay_rate(t, E, drop: float = 0.2):
    """Least-squares rate ``lam`` of ``E ~ exp(-lam t)`` after dropping the leading ``drop`` fraction.

    Returns ``(lam, residual)`` where the residual is the RMS misfit of
    ``log E`` about the fitted line.
    """
    t = np.asarray(t, dtype=float)
    E = np.asarray(E, dtype=float)
    if t.shape != E.shape or t.ndim != 1:
        raise ValueError("t and E must be 1-D arrays of equal length")
    if np.any(~(E > 0)):
        raise ValueError("energy samples must be positive")
    start = int(np.floor(drop * t.size))
    if t.size - start < 10:
        raise ValueError(f"need at least 10 samples after the transient, got {t.size - start}")
    tt, y = t[start:], np.log(E[start:])
    slope, intercept = np.polyfit(tt, y, 1)
    resid = y - (slope * tt + intercept)
    return float(-slope), float(np.sqrt(np.mean(resid**2)))


def gronwall_monitor(run, weights: WeightPair, C: float, *, source_norms=None, K: float = 10.0) -> int:
    """Count steps violating the discrete Gronwall inequality.

    With ``E_w = phibar E`` from the run's energy series, a step ``n`` is a
    violation when ``(E_w[n+1] - E_w[n]) / dt + C E_w[n]`` exceeds
    ``K * (phi + phibar)(t_n) * ||f(t_n)||^2``.  ``source_norms`` holds the
    squared L2 norms of the source per step (zero when omitted).
    """
    t = np.asarray(run.times, dtype=float)
    E = np.asarray(run.energy, dtype=float)
    if t.size < 2:
        return 0
    Ew = weights.bar(t) * E
    dt = np.diff(t)
    lhs = np.diff(Ew) / dt + C * Ew[:-1]
    f2 = np.zeros(t.size - 1) if source_norms is None else np.asarray(source_norms, dtype=float)[: t.size - 1]
    rhs = K * (weights.phi(t[:-1]) + weights.bar(t[:-1])) * f2
    # allow rounding on the zero problem
    tol = 1e-12 * np.maximum(np.abs(Ew[:-1]) / np.maximum(dt, 1e-300), 1e-300)
    return int(np.count_nonzero(lhs > rhs + tol))


@dataclass
class EnergyReport:
    times: np.ndarray
    weighted: np.ndarray
    plain: np.ndarray
    sobolev: dict = field(default_factory=dict)
    rate: float = float("nan")
    residual: float = float("nan")


def energy_report(run, weights: WeightPair, s_values=(1,), drop: float = 0.2) -> EnergyReport:
    """Energy series of an evolution with weighted and higher-order variants.

    Higher-order series are taken on the saved levels of the run.
    """
    t = np.asarray(run.times, dtype=float)
    E = np.asarray(run.energy, dtype=float)
    sol = run.solution
    vel = np.gradient(sol.values, sol.dt, axis=0) if sol.n_t >= 2 else np.zeros_like(sol.values)
    sob = {}
    for s in s_values:
        sob[s] = np.array(
            [hs_energy(sol.values[n], vel[n], weights, sol.times[n], sol.grid, s) for n in range(sol.n_t)]
        )
    rate, resid = (float("nan"), float("nan"))
    if t.size >= 13 and np.all(E > 0):
        rate, resid = decay_rate(t, E, drop)
    return EnergyReport(t, weights.bar(t) * E, E, sob, rate, resid)
