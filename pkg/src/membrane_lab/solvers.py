"""Time integration of the linear damped wave problem and of the perturbation equation.

Both integrators use the three-level central scheme

    A (h+ - 2h + h-)/dt^2 + C (h+ - h-)/(2dt) + E.grad(h+ - h-)/(2dt) + S(h) = f,

with ``S(h) = -B lap h + D.grad h + H:hess h`` evaluated on the current
level.  This is the velocity-Verlet (kick-drift-kick) form of the first-order
system for ``(h, h_t)`` with the end velocity taken implicitly.  The mixed
term makes each step a small linear system in ``h+`` that is solved by a
fixed-point sweep; the sweep contracts by roughly ``|E| cfl / (2 A)`` per
pass.  Boundary nodes carry homogeneous Dirichlet data, and an optional
sponge layer damps the level-to-level increment near the edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exact_solutions import HyperplaneParams, causal_margin
from .grid import Grid, SpaceTimeField, gradient, hessian, integrate, sponge_profile
from .membrane_ops import CoefficientSet, mass_density

__all__ = [
    "COMPLETED",
    "BLEW_UP",
    "CAUSAL_VIOLATION",
    "BLOWUP_FACTOR",
    "LinearProblem",
    "EvolutionResult",
    "stable_dt",
    "solve_linear_damped",
    "evolve_nonlinear",
    "field_energy",
]

COMPLETED = "completed"
BLEW_UP = "blew-up"
CAUSAL_VIOLATION = "causal-violation"
BLOWUP_FACTOR = 1e6


def stable_dt(c: CoefficientSet, grid: Grid, cfl: float) -> float:
    """``cfl * dx / sqrt(max (B + |H|) / A)``."""
    if not 0 < cfl < 1:
        raise ValueError(f"cfl must lie in (0, 1), got {cfl}")
    speed_sq = c.wave_speed_sq()
    if not speed_sq > 0:
        raise ValueError("coefficients give no positive wave speed")
    return cfl * grid.spacing / np.sqrt(speed_sq)


def field_energy(h: np.ndarray, v: np.ndarray, grid: Grid, mask=None) -> float:
    """``int (h_t^2 + |grad h|^2 + h^2)`` by box quadrature."""
    dens = v * v + h * h + sum(g * g for g in gradient(h, grid))
    if mask is not None:
        dens = np.where(mask, dens, 0.0)
    return float(integrate(dens, grid))


@dataclass
class LinearProblem:
    """Data for the linear damped wave problem.

    ``coefficients`` is a static :class:`CoefficientSet`, a time-indexed one
    with one slice per lattice level, or a callable ``t -> CoefficientSet``.
    ``source`` is either ``None`` or a :class:`SpaceTimeField` on the run's
    lattice.  ``start`` selects how the first step is built: ``"taylor"``
    uses ``h0 + dt h1 + dt^2/2 h_tt(0)``, ``"levels"`` takes
    ``h0 + dt h1`` so zero data give two zero levels exactly.
    """

    coefficients: object
    h0: np.ndarray
    h1: np.ndarray
    T_end: float
    dt: float
    source: SpaceTimeField | None = None
    sponge: bool = True
    sponge_strength: float = 4.0
    save_every: int = 1
    start: str = "taylor"
    validated: bool | None = None
    max_sweeps: int = 50

    @property
    def n_steps(self) -> int:
        n = int(round(self.T_end / self.dt))
        if abs(n * self.dt - self.T_end) > 1e-9 * max(1.0, self.T_end):
            raise ValueError(f"T_end={self.T_end} is not a multiple of dt={self.dt}")
        return n


@dataclass
class EvolutionResult:
    solution: SpaceTimeField
    times: np.ndarray
    energy: np.ndarray
    status: str = COMPLETED
    message: str = ""
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == COMPLETED


def _coeff_getter(coefficients, n_levels: int, dt: float) -> Callable[[int], CoefficientSet]:
    if callable(coefficients) and not isinstance(coefficients, CoefficientSet):
        return lambda n: coefficients(n * dt)
    c = coefficients
    if np.ndim(c.A) == c.grid.dim:
        return lambda n: c
    if np.shape(c.A)[0] < n_levels:
        raise ValueError(
            f"time-indexed coefficients have {np.shape(c.A)[0]} levels, the run needs {n_levels}"
        )
    return c.at


def _spatial_part(c: CoefficientSet, h: np.ndarray, grid: Grid) -> np.ndarray:
    M = grid.dim
    g = gradient(h, grid)
    hs = hessian(h, grid)
    out = -c.B * sum(hs[k][k] for k in range(M))
    for k in range(M):
        out = out + c.D[k] * g[k]
        for i in range(M):
            out = out + c.H[k][i] * hs[k][i]
    return out


def _solve_step(c: CoefficientSet, rhs: np.ndarray, dt: float, grid: Grid, interior, max_sweeps: int):
    """Solve ``alpha x + E.grad x / (2dt) = rhs`` on interior nodes, zero on the boundary."""
    alpha = c.A / (dt * dt) + c.C / (2.0 * dt)
    if np.any(alpha[interior] <= 0):
        raise FloatingPointError("step matrix lost its diagonal (damping too negative for dt)")
    x = np.where(interior, rhs / alpha, 0.0)
    if all(not np.any(e) for e in c.E):
        return x, 0
    for sweep in range(1, max_sweeps + 1):
        g = gradient(x, grid)
        mix = sum(c.E[k] * g[k] for k in range(grid.dim)) / (2.0 * dt)
        new = np.where(interior, (rhs - mix) / alpha, 0.0)
        delta = np.max(np.abs(new - x))
        x = new
        if delta <= 1e-15 * max(1.0, np.max(np.abs(x))):
            return x, sweep
    return x, max_sweeps


def solve_linear_damped(p: LinearProblem, grid: Grid) -> EvolutionResult:
    """Integrate the linear damped wave problem on ``[0, T_end]``."""
    dt = p.dt
    n_steps = p.n_steps
    if n_steps < 1:
        raise ValueError("need at least one step")
    h0 = grid.check(np.asarray(p.h0, dtype=float), "h0")
    h1 = grid.check(np.asarray(p.h1, dtype=float), "h1")
    if p.source is not None:
        if p.source.values.shape[0] < n_steps + 1 or abs(p.source.dt - dt) > 1e-12 * dt:
            raise ValueError("source lattice does not match the run")
    coeff = _coeff_getter(p.coefficients, n_steps + 1, dt)
    interior = grid.interior_mask()
    damp = np.exp(-sponge_profile(grid, p.sponge_strength) * dt) if p.sponge and grid.sponge_width else None

    def source(n):
        return 0.0 if p.source is None else p.source.values[n]

    if p.start == "taylor":
        c0 = coeff(0)
        g1 = gradient(h1, grid)
        acc = (source(0) - c0.C * h1 - sum(c0.E[k] * g1[k] for k in range(grid.dim)) - _spatial_part(c0, h0, grid)) / c0.A
        h_next = h0 + dt * h1 + 0.5 * dt * dt * acc
    elif p.start == "levels":
        h_next = h0 + dt * h1
    else:
        raise ValueError(f"unknown start mode {p.start!r}")
    h_next = np.where(interior, h_next, 0.0)
    h_prev, h_cur = np.where(interior, h0, 0.0), h_next

    ref = max(field_energy(h0, h1, grid) ** 0.5, 1e-300)
    if p.source is not None:
        ref = max(ref, float(np.max(np.abs(p.source.values))) * max(p.T_end, 1.0) ** 2 * grid.volume**0.5)

    saved = [h_prev.copy()]
    if p.save_every == 1:
        saved.append(h_cur.copy())
    energies = [field_energy(h_prev, h1, grid)]
    status, message = COMPLETED, ""
    max_sweeps_used = 0
    n_done = 1
    for n in range(1, n_steps):
        c = coeff(n)
        S = _spatial_part(c, h_cur, grid)
        alpha_minus = c.A / (dt * dt) - c.C / (2.0 * dt)
        g_prev = gradient(h_prev, grid)
        mix_prev = sum(c.E[k] * g_prev[k] for k in range(grid.dim)) / (2.0 * dt)
        rhs = source(n) - S + 2.0 * c.A / (dt * dt) * h_cur - alpha_minus * h_prev + mix_prev
        h_next, sweeps = _solve_step(c, rhs, dt, grid, interior, p.max_sweeps)
        max_sweeps_used = max(max_sweeps_used, sweeps)
        if damp is not None:
            h_next = h_cur + damp * (h_next - h_cur)
        energies.append(field_energy(h_cur, (h_next - h_prev) / (2.0 * dt), grid))
        h_prev, h_cur = h_cur, h_next
        n_done = n + 1
        if (n + 1) % p.save_every == 0:
            saved.append(h_cur.copy())
        if not np.all(np.isfinite(h_cur)) or np.sqrt(energies[-1]) > BLOWUP_FACTOR * ref:
            status = BLEW_UP
            message = f"norm exceeded {BLOWUP_FACTOR:g} x initial at t={(n + 1) * dt:.4g}"
            break
    if status == COMPLETED:
        energies.append(field_energy(h_cur, (h_cur - h_prev) / dt, grid))
    times = dt * np.arange(len(energies))
    saved = [x for x in saved if np.all(np.isfinite(x))]
    while len(saved) < 2:
        saved.append(saved[-1].copy())
    sol = SpaceTimeField(grid, dt * p.save_every, np.array(saved))
    return EvolutionResult(
        sol,
        times,
        np.array(energies),
        status,
        message,
        {"max_sweeps": max_sweeps_used, "steps": n_done, "validated": p.validated},
    )


def evolve_nonlinear(
    w0: np.ndarray,
    w1: np.ndarray,
    hp: HyperplaneParams,
    grid: Grid,
    dt: float,
    T_end: float,
    *,
    corrections: int = 1,
    sponge: bool = True,
    sponge_strength: float = 4.0,
    save_every: int = 1,
) -> EvolutionResult:
    """Leapfrog predictor-corrector for the perturbation equation about ``hp``.

    Each step solves the membrane equation for ``w_tt`` with ``w_t`` and
    ``grad w_t`` taken from the previous pass: the predictor lags them to the
    backward difference, every correction replaces them by the centred
    difference through the latest ``w+``.  Causal margin and mass are
    recorded at each level.
    """
    n_steps = int(round(T_end / dt))
    if n_steps < 1 or abs(n_steps * dt - T_end) > 1e-9 * max(1.0, T_end):
        raise ValueError(f"T_end={T_end} is not a positive multiple of dt={dt}")
    if corrections < 0:
        raise ValueError("corrections must be nonnegative")
    w0 = grid.check(np.asarray(w0, dtype=float), "w0")
    w1 = grid.check(np.asarray(w1, dtype=float), "w1")
    slope = np.asarray(hp.slope, dtype=float)
    if slope.shape != (grid.dim,):
        raise ValueError("hyperplane dimension does not match the grid")
    M = grid.dim
    interior = grid.interior_mask()
    damp = np.exp(-sponge_profile(grid, sponge_strength) * dt) if sponge and grid.sponge_width else None

    def accel(w, q):
        g = gradient(w, grid)
        hs = hessian(w, grid)
        a = [slope[k] + g[k] for k in range(M)]
        a_sq = sum(x * x for x in a)
        lap = sum(hs[k][k] for k in range(M))
        aha = sum(a[k] * hs[k][i] * a[i] for k in range(M) for i in range(M))
        P = gradient(q, grid)
        a_p = sum(a[k] * P[k] for k in range(M))
        return ((1.0 + a_sq - q * q) * lap - aha + 2.0 * q * a_p) / (1.0 + a_sq), a

    def margin_of(w, q):
        g = gradient(w, grid)
        return causal_margin(q, [slope[k] + g[k] for k in range(M)])

    m0 = margin_of(w0, w1)
    if np.min(m0) <= 0:
        return EvolutionResult(
            SpaceTimeField(grid, dt, np.stack([w0, w0])), np.zeros(1), np.zeros(1), CAUSAL_VIOLATION,
            "initial data are not timelike",
        )

    acc0, _ = accel(w0, w1)
    w_prev = np.where(interior, w0, 0.0)
    w_cur = np.where(interior, w0 + dt * w1 + 0.5 * dt * dt * acc0, 0.0)
    ref = max(field_energy(w0, w1, grid) ** 0.5, 1e-300)

    def mass_of(w, q):
        g = gradient(w, grid)
        return float(integrate(mass_density(q, [slope[k] + g[k] for k in range(M)]), grid))

    saved = [w_prev.copy()]
    if save_every == 1:
        saved.append(w_cur.copy())
    energies = [field_energy(w0, w1, grid)]
    masses = [mass_of(w0, w1)]
    margins = [float(np.min(m0))]
    status, message = COMPLETED, ""
    for n in range(1, n_steps):
        q = (w_cur - w_prev) / dt
        acc, _ = accel(w_cur, q)
        w_next = np.where(interior, 2.0 * w_cur - w_prev + dt * dt * acc, 0.0)
        for _ in range(corrections):
            q = (w_next - w_prev) / (2.0 * dt)
            acc, _ = accel(w_cur, q)
            w_next = np.where(interior, 2.0 * w_cur - w_prev + dt * dt * acc, 0.0)
        if damp is not None:
            w_next = w_cur + damp * (w_next - w_cur)
        q = (w_next - w_prev) / (2.0 * dt)
        if not np.all(np.isfinite(w_next)):
            status, message = BLEW_UP, f"non-finite values at t={(n + 1) * dt:.4g}"
            break
        mg = float(np.min(margin_of(w_cur, q)))
        margins.append(mg)
        if mg <= 0:
            status, message = CAUSAL_VIOLATION, f"causal margin {mg:.3e} at t={n * dt:.4g}"
            break
        energies.append(field_energy(w_cur, q, grid))
        masses.append(mass_of(w_cur, q))
        w_prev, w_cur = w_cur, w_next
        if (n + 1) % save_every == 0:
            saved.append(w_cur.copy())
        if np.sqrt(energies[-1]) > BLOWUP_FACTOR * ref:
            status, message = BLEW_UP, f"norm exceeded {BLOWUP_FACTOR:g} x initial at t={n * dt:.4g}"
            break
    if status == COMPLETED:
        q = (w_cur - w_prev) / dt
        energies.append(field_energy(w_cur, q, grid))
        masses.append(mass_of(w_cur, q))
        margins.append(float(np.min(margin_of(w_cur, q))))
    if len(saved) < 2:
        saved.append(w_cur.copy())
    times = dt * np.arange(len(energies))
    return EvolutionResult(
        SpaceTimeField(grid, dt * save_every, np.array(saved)),
        times,
        np.array(energies),
        status,
        message,
        {"mass": np.array(masses), "margin": np.array(margins), "corrections": corrections},
    )
