"""Newton iteration with smoothing for the perturbation equation about a hyperplane.

Each step linearizes the discrete perturbation operator at the current
iterate, smooths the residual with the spectral cutoff at ``N_m = N0^m`` and
marches the linear damped problem ``L'_w h = -P_N(chi E)`` from zero data.
Because the linear march uses the same stencils as the residual, the
linearization is the exact Jacobian of the discrete operator and the new
residual is the smoothing defect plus the discrete quadratic remainder.

``chi`` is a smooth spatial window that tapers the residual to zero before
the box edge, where the Dirichlet nodes would otherwise put a jump into the
cosine expansion.  Errors are reported on the backward light cone of the
window plateau, ``|x| + c t <= plateau``: every space-time point there
depends only on residual values that the window leaves untouched, and that
set is mapped into itself by each step.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .exact_solutions import HyperplaneParams
from .grid import Grid, SpaceTimeField, sobolev_norm
from .membrane_ops import (
    CoefficientSet,
    check_assumptions,
    dissipation_onset,
    linearize,
    remainder,
    residual_perturbation,
    time_envelope,
)
from .smoothing import SmoothingSchedule, lowpass
from .solvers import COMPLETED, LinearProblem, solve_linear_damped, stable_dt

__all__ = [
    "IterationConfig",
    "IterationState",
    "StepRecord",
    "regularity_index",
    "norm_order",
    "initial_profile",
    "initial_guess",
    "residual_window",
    "cone_mask",
    "lift_initial_data",
    "iterate_once",
    "run",
    "tame_check",
    "convergence_orders",
    "convergence_csv",
]


@dataclass(frozen=True)
class IterationConfig:
    """Parameters of a Newton-with-smoothing run.

    ``k_bar < k`` fix the regularity schedule, ``profile_width`` the length
    scale of the initial profile, ``window`` and ``taper`` the plateau half
    width and edge width of the residual window (``window=None`` puts the
    plateau ``3 taper`` inside the box).  ``cone_speed`` overrides the
    propagation speed used for the error region.
    """

    eps: float = 1e-2
    N0: float = 2.0
    p: float = 1.0
    k_bar: float = 1.0
    k: float = 2.0
    m_max: int = 5
    dim: int = 1
    half_width: float = 10.0
    points: int = 128
    T_end: float = 2.0
    cfl: float = 0.5
    profile_width: float = 1.25
    window: float | None = 2.0
    taper: float = 2.0
    cone_speed: float | None = None
    floor_factor: float = 10.0
    smooth_iterates: bool = False
    time_smoothing: bool = False
    norm_rounding: str = "floor"
    sigma: float = 1.5
    sigma0: float = 3.0

    def __post_init__(self):
        if not self.p > 0.5:
            raise ValueError(f"p must exceed 1/2, got {self.p}")
        if not 0 <= self.eps < 1:
            raise ValueError(f"eps must lie in [0, 1), got {self.eps}")
        if not self.N0 > 1:
            raise ValueError(f"N0 must exceed 1, got {self.N0}")
        if not 1 <= self.k_bar < self.k:
            raise ValueError(f"need 1 <= k_bar < k, got k_bar={self.k_bar}, k={self.k}")
        if self.m_max < 0:
            raise ValueError("m_max must be nonnegative")
        if not self.T_end > 0:
            raise ValueError("T_end must be positive")
        if self.norm_rounding not in ("floor", "ceil"):
            raise ValueError("norm_rounding must be 'floor' or 'ceil'")
        if self.profile_width <= 0 or self.taper <= 0:
            raise ValueError("profile_width and taper must be positive")

    @property
    def grid(self) -> Grid:
        return Grid(self.dim, self.half_width, self.points)

    @property
    def schedule(self) -> SmoothingSchedule:
        return SmoothingSchedule(self.N0, self.m_max)

    @property
    def plateau(self) -> float:
        return self.half_width - 3.0 * self.taper if self.window is None else self.window


def regularity_index(m: int, k_bar: float, k: float) -> float:
    """``k_bar + (k - k_bar) / 2^m``."""
    return k_bar + (k - k_bar) / 2.0**m


def norm_order(k_m: float, rounding: str = "floor") -> int:
    """Integer Sobolev order used to measure a fractional index."""
    return int(math.floor(k_m + 1e-12) if rounding == "floor" else math.ceil(k_m - 1e-12))


@dataclass
class StepRecord:
    m: int
    N: float
    k_m: float
    order: int
    error: float
    step: float
    assumptions_ok: bool | None = None
    failures: list = field(default_factory=list)


@dataclass
class IterationState:
    m: int
    w: SpaceTimeField
    residual: np.ndarray
    history: list = field(default_factory=list)
    status: str = "running"
    floor: float = 0.0
    report: dict = field(default_factory=dict)

    @property
    def errors(self) -> list[float]:
        return [r.error for r in self.history]

    @property
    def steps(self) -> list[float]:
        return [r.step for r in self.history[1:]]


def _unit_slope(hp: HyperplaneParams) -> np.ndarray:
    A = np.asarray(hp.slope, dtype=float)
    return A / np.linalg.norm(A)


def initial_profile(config: IterationConfig, hp: HyperplaneParams, grid: Grid) -> np.ndarray:
    """``eps width tanh(A.x / (|A| width))``.

    The sigmoid has unit slope at the origin, so the profile increases
    strictly along ``A`` and every derivative is bounded by ``eps`` up to a
    factor depending only on the order.
    """
    if hp.dim != grid.dim:
        raise ValueError("hyperplane dimension does not match the grid")
    a = _unit_slope(hp)
    s = sum(a[k] * grid.coords[k] for k in range(grid.dim))
    ell = config.profile_width
    return config.eps * ell * np.tanh(s / ell)


def _time_lattice(config: IterationConfig, hp: HyperplaneParams, grid: Grid):
    # the fastest characteristic of the flat operator is 1 / sqrt(1 + |A|^2)
    # in the slope direction and 1 across it; stable_dt on the flat
    # linearization gives a safe common step
    A = np.asarray(hp.slope, dtype=float)
    flat = CoefficientSet.constant(grid, A=1 + A @ A, B=1 + A @ A, H=np.outer(A, A))
    dt0 = stable_dt(flat, grid, config.cfl)
    n_steps = max(2, int(math.ceil(config.T_end / dt0)))
    return config.T_end / n_steps, n_steps + 1


def initial_guess(config: IterationConfig, hp: HyperplaneParams, grid: Grid | None = None) -> SpaceTimeField:
    """``g(t) profile(x)`` with ``g = t^2 (t^4+1)^(-p)`` on the run's lattice."""
    grid = config.grid if grid is None else grid
    dt, n_t = _time_lattice(config, hp, grid)
    prof = initial_profile(config, hp, grid)
    g, _, _ = time_envelope(dt * np.arange(n_t), config.p)
    values = g.reshape((-1,) + (1,) * grid.dim) * prof
    return SpaceTimeField(grid, dt, values, meta={"profile": prof})


def residual_window(config: IterationConfig, grid: Grid) -> np.ndarray:
    """Product over axes of a smooth plateau that is 1 on ``|x| <= plateau``."""
    L0, d = config.plateau, config.taper
    if not 0 < L0 < grid.half_width:
        raise ValueError(f"window plateau {L0} must lie inside the box")
    chi = np.ones(grid.shape)
    for x in grid.coords:
        # erf ramps centred 1.5 taper outside the plateau, width taper / 2
        r = np.abs(x) - L0 - 1.5 * d
        chi = chi * 0.5 * (1.0 - erf(r / (0.5 * d)))
    return chi


def cone_mask(config: IterationConfig, grid: Grid, t: float, speed: float) -> np.ndarray:
    """Nodes with ``max|x_k| + speed t <= plateau``."""
    reach = config.plateau - speed * t
    m = np.ones(grid.shape, dtype=bool)
    for x in grid.coords:
        m &= np.abs(x) <= reach
    return m


def _cone_speed(config: IterationConfig, grid: Grid, dt: float) -> float:
    if config.cone_speed is not None:
        return config.cone_speed
    # one stencil cell per step bounds every discrete domain of dependence
    return grid.spacing / dt


def lift_initial_data(w0: np.ndarray, w1: np.ndarray, grid: Grid, dt: float, n_t: int) -> SpaceTimeField:
    """Background ``exp(-t^2) w0 + t exp(-t) w1`` carrying the Cauchy data."""
    w0 = grid.check(np.asarray(w0, dtype=float), "w0")
    w1 = grid.check(np.asarray(w1, dtype=float), "w1")
    t = dt * np.arange(n_t)
    shape = (-1,) + (1,) * grid.dim
    a = np.exp(-(t**2)).reshape(shape)
    b = (t * np.exp(-t)).reshape(shape)
    return SpaceTimeField(grid, dt, a * w0 + b * w1)


def _pad_levels(inner: np.ndarray) -> np.ndarray:
    z = np.zeros_like(inner[:1])
    return np.concatenate([z, inner, z])


def _error_norm(E: np.ndarray, field_: SpaceTimeField, order: int, config: IterationConfig, speed: float) -> float:
    """Sup over levels of the spatial norm on the cone region; ``E`` holds all levels."""
    grid = field_.grid
    best = 0.0
    for n in range(1, field_.n_t - 1):
        mask = cone_mask(config, grid, field_.times[n], speed)
        if not mask.any():
            continue
        best = max(best, float(sobolev_norm(E[n], grid, order, mask=mask)))
    return best


def _roundoff_floor(config: IterationConfig, hp: HyperplaneParams, field_: SpaceTimeField, speed: float, order: int) -> float:
    """Residual of an exact solution at the iterates' amplitude, measured like the iterates.

    A tilt ``w = a . x`` of the hyperplane solves the perturbation equation
    exactly, so its discrete residual is pure rounding.
    """
    grid = field_.grid
    amp = max(float(np.max(np.abs(field_.values))), np.finfo(float).tiny)
    a = _unit_slope(hp) * amp / grid.half_width
    tilt = sum(a[k] * grid.coords[k] for k in range(grid.dim))
    w = SpaceTimeField(grid, field_.dt, np.broadcast_to(tilt, field_.values.shape).copy())
    R = _pad_levels(residual_perturbation(w, hp))
    return _error_norm(R, field_, order, config, speed)


def _step_norm(h: SpaceTimeField, order: int) -> float:
    return max(float(sobolev_norm(h.values[n], h.grid, order)) for n in range(h.n_t))


def iterate_once(state: IterationState, config: IterationConfig, hp: HyperplaneParams) -> IterationState:
    """One smoothed Newton step from ``w^(m-1)`` to ``w^(m)``."""
    m = state.m + 1
    if m > config.m_max:
        raise ValueError(f"step {m} exceeds m_max={config.m_max}")
    w = state.w
    grid = w.grid
    N = config.schedule.N(m)
    k_m = regularity_index(m, config.k_bar, config.k)
    order = norm_order(k_m, config.norm_rounding)
    speed = state.report["cone_speed"]
    chi = residual_window(config, grid)

    forcing = w.with_values(chi * state.residual)
    forcing = lowpass(forcing, N, time_smoothing=config.time_smoothing)
    coeffs = linearize(w, hp)
    report = check_assumptions(
        coeffs, config.sigma, config.sigma0, max(config.eps, 1e-300),
        damping_from=dissipation_onset(config.p), mask=grid.interior_mask(),
    )
    problem = LinearProblem(
        coefficients=lambda t: coeffs.at(int(round(t / w.dt)) - 1),
        h0=grid.zeros(),
        h1=grid.zeros(),
        T_end=w.dt * (w.n_t - 1),
        dt=w.dt,
        source=w.with_values(-forcing.values),
        sponge=False,
        start="levels",
    )
    result = solve_linear_damped(problem, grid)
    if result.status != COMPLETED:
        state.status = "diverged"
        state.report["message"] = result.message
        return state
    h = result.solution
    if config.smooth_iterates:
        h = lowpass(h, N, time_smoothing=config.time_smoothing)
    w_new = w.with_values(w.values + h.values)
    E_new = _pad_levels(residual_perturbation(w_new, hp))
    err = _error_norm(E_new, w_new, order, config, speed)
    rec = StepRecord(m, N, k_m, order, err, _step_norm(h, order), report.passed, report.failures())
    return IterationState(m, w_new, E_new, state.history + [rec], state.status, state.floor, state.report)


def run(config: IterationConfig, hp: HyperplaneParams, data=None) -> IterationState:
    """Iterate until ``m_max``, the roundoff floor, or divergence.

    ``data = (w0, w1)`` adds the lifted background so the iterates carry
    that Cauchy data; the reported field is the full perturbation.
    """
    grid = config.grid
    w = initial_guess(config, hp, grid)
    if data is not None:
        b = lift_initial_data(data[0], data[1], grid, w.dt, w.n_t)
        w = w.with_values(w.values + b.values)
    speed = _cone_speed(config, grid, w.dt)
    k0 = regularity_index(0, config.k_bar, config.k)
    order0 = norm_order(k0, config.norm_rounding)
    E = _pad_levels(residual_perturbation(w, hp))
    err0 = _error_norm(E, w, order0, config, speed)
    # iterates after the first step are measured in the order of k_1 onward
    order1 = norm_order(regularity_index(1, config.k_bar, config.k), config.norm_rounding)
    floor = config.floor_factor * _roundoff_floor(config, hp, w, speed, order1)
    state = IterationState(
        0, w, E, [StepRecord(0, 1.0, k0, order0, err0, 0.0)], "running", floor,
        {"cone_speed": speed, "dt": w.dt, "n_t": w.n_t},
    )
    if err0 <= floor:
        state.status = "converged"
        return state
    growth = 0
    while state.m < config.m_max:
        prev = state.history[-1].error
        state = iterate_once(state, config, hp)
        if state.status == "diverged":
            break
        err = state.history[-1].error
        growth = growth + 1 if err > prev else 0
        if growth >= 2:
            state.status = "diverged"
            break
        if err <= floor:
            state.status = "converged"
            break
    else:
        state.status = "converged" if state.history[-1].error <= floor else "max-steps"
    state.report["orders"] = convergence_orders(state.errors)
    return state


def convergence_orders(errors) -> list[float]:
    """``q_m = log e_m / log e_(m-1)``; NaN where undefined."""
    q = []
    for a, b in zip(errors[:-1], errors[1:]):
        if a > 0 and b > 0 and a != 1.0:
            q.append(math.log(b) / math.log(a))
        else:
            q.append(float("nan"))
    return q


def convergence_csv(state: IterationState) -> str:
    """Table with columns ``m, N_m, k_m, error_norm, step_norm, q_m``."""
    q = [float("nan")] + convergence_orders(state.errors)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["m", "N_m", "k_m", "error_norm", "step_norm", "q_m"])
    for rec, qm in zip(state.history, q):
        wr.writerow([rec.m, repr(rec.N), repr(rec.k_m), repr(rec.error), repr(rec.step), repr(qm)])
    return buf.getvalue()


def tame_check(h: SpaceTimeField, N: float, s: int, hp: HyperplaneParams, *, time_smoothing: bool = False) -> float:
    """``sup_t ||P_N R(h)||_{H^s} / (N^(4s) sup_t ||h||_{H^s}^2)``, zero for ``h = 0``."""
    if not isinstance(s, (int, np.integer)) or s < 1:
        raise ValueError(f"s must be an integer >= 1, got {s}")
    denom_h = _step_norm(h, s)
    if denom_h == 0.0:
        return 0.0
    R = h.with_values(_pad_levels(remainder(h, hp)))
    PR = lowpass(R, N, time_smoothing=time_smoothing)
    num = max(float(sobolev_norm(PR.values[n], h.grid, s)) for n in range(1, h.n_t - 1))
    return num / (float(N) ** (4 * s) * denom_h**2)
