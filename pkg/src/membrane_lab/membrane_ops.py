"""Nonlinear membrane operators, their linearization and the quadratic remainder.

Everything is evaluated from one set of discrete derivatives (a *jet*) taken
on the space-time lattice: central second differences in time and the
stencils of :mod:`membrane_lab.grid` in space.  The operators are written in
chain-rule form,

    L(w) = (1 + |a|^2) w_tt - (1 + |a|^2 - w_t^2) lap(w) + a^T hess(w) a
           - 2 w_t a . grad(w_t),              a = A + grad(w),

which is the perturbation equation about the hyperplane ``A.x + B`` with the
``d_t`` and ``d_x`` of the quadratic forms expanded.  Because the residual is
a polynomial in the jet entries, :func:`linearize` returns the *exact*
derivative of the discrete residual and :func:`remainder` closes the
identity ``L(h) - L(0) - L'_0 h - R(h) = 0`` up to rounding.

Residuals are reported on every spatial node but set to zero on the
boundary nodes, where the Dirichlet data leave no equation to satisfy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .exact_solutions import HyperplaneParams
from .grid import Grid, SpaceTimeField, gradient, hessian, integrate, multi_indices, partial

__all__ = [
    "Jet",
    "CoefficientSet",
    "AssumptionReport",
    "space_time_jet",
    "residual_full",
    "residual_perturbation",
    "operator_from_jet",
    "linearize",
    "assemble_coefficients",
    "init_linearization",
    "dissipation_onset",
    "time_envelope",
    "remainder",
    "check_assumptions",
    "mass_functional",
    "mass_density",
    "rescale",
]


@dataclass
class Jet:
    """Discrete derivatives of a field on one or more time levels."""

    grid: Grid
    u: np.ndarray
    u_t: np.ndarray
    u_tt: np.ndarray
    grad: list
    grad_t: list
    hess: list

    @property
    def lap(self) -> np.ndarray:
        return sum(self.hess[k][k] for k in range(self.grid.dim))

    @classmethod
    def from_parts(cls, grid: Grid, u, u_t, u_tt) -> "Jet":
        """Build a jet from given time derivatives; space derivatives use stencils."""
        u, u_t, u_tt = (np.asarray(x, dtype=float) for x in (u, u_t, u_tt))
        return cls(grid, u, u_t, u_tt, gradient(u, grid), gradient(u_t, grid), hessian(u, grid))


def _level_slice(n_t: int, t_index):
    if t_index is None:
        return slice(0, n_t - 2), slice(1, n_t - 1), slice(2, n_t)
    if not 1 <= t_index <= n_t - 2:
        raise IndexError(
            f"time index {t_index} has no neighbours on a lattice with {n_t} levels"
        )
    return slice(t_index - 1, t_index), slice(t_index, t_index + 1), slice(t_index + 1, t_index + 2)


def space_time_jet(field: SpaceTimeField, t_index: int | None = None) -> Jet:
    """Jet at level ``t_index`` (shape ``grid.shape``) or all interior levels.

    With ``t_index=None`` the arrays carry a leading axis of length
    ``n_t - 2`` for levels ``1 .. n_t - 2``.
    """
    v = field.values
    lo, mid, hi = _level_slice(field.n_t, t_index)
    dt = field.dt
    u = v[mid]
    u_t = (v[hi] - v[lo]) / (2.0 * dt)
    u_tt = (v[hi] - 2.0 * v[mid] + v[lo]) / (dt * dt)
    if t_index is not None:
        u, u_t, u_tt = u[0], u_t[0], u_tt[0]
    return Jet.from_parts(field.grid, u, u_t, u_tt)


def _slope(hp: HyperplaneParams | None, dim: int) -> np.ndarray:
    if hp is None:
        return np.zeros(dim)
    slope = np.asarray(hp.slope, dtype=float)
    if slope.shape != (dim,):
        raise ValueError(f"hyperplane slope has {slope.size} components, grid has {dim}")
    return slope


def _zero_boundary(values: np.ndarray, grid: Grid) -> np.ndarray:
    mask = grid.interior_mask()
    return np.where(mask, values, 0.0)


def operator_from_jet(jet: Jet, slope) -> np.ndarray:
    """Pointwise value of the membrane operator with background slope ``slope``.

    ``slope = 0`` gives the full operator F(u); a nonzero slope gives the
    perturbation operator about ``slope . x + B``.
    """
    M = jet.grid.dim
    a = [slope[k] + jet.grad[k] for k in range(M)]
    a_sq = sum(ak * ak for ak in a)
    q = jet.u_t
    a_hess_a = sum(a[k] * jet.hess[k][i] * a[i] for k in range(M) for i in range(M))
    a_dot_p = sum(a[k] * jet.grad_t[k] for k in range(M))
    return (1.0 + a_sq) * jet.u_tt - (1.0 + a_sq - q * q) * jet.lap + a_hess_a - 2.0 * q * a_dot_p


def residual_full(u: SpaceTimeField, t_index: int | None = None) -> np.ndarray:
    """Discrete F(u) of the full membrane equation.

    The strictly positive factor ``(1 + |grad u|^2 - u_t^2)^(-3/2)`` of the
    Euler-Lagrange form is dropped; zeros of F are zeros of the original
    equation for timelike data.
    """
    jet = space_time_jet(u, t_index)
    return _zero_boundary(operator_from_jet(jet, np.zeros(u.grid.dim)), u.grid)


def residual_perturbation(
    w: SpaceTimeField, hp: HyperplaneParams, t_index: int | None = None
) -> np.ndarray:
    """Discrete perturbation operator about the hyperplane ``hp``.

    Agrees with ``residual_full(u_s + w)`` up to rounding because the affine
    part only enters through ``grad u = A + grad w``.
    """
    jet = space_time_jet(w, t_index)
    return _zero_boundary(operator_from_jet(jet, _slope(hp, w.grid.dim)), w.grid)


@dataclass
class CoefficientSet:
    """Coefficients of ``A h_tt - B lap h + C h_t + D.grad h + E.grad h_t + H:hess h``.

    ``D`` and ``E`` are lists of length ``M``; ``H`` is an ``M x M`` nested
    list with ``H[k][i] is H[i][k]`` allowed.  Arrays may carry a leading
    time axis, in which case ``times`` lists the matching instants.
    """

    grid: Grid
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: list
    E: list
    H: list
    times: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        M = self.grid.dim
        if len(self.D) != M or len(self.E) != M or len(self.H) != M:
            raise ValueError("D, E and H must have one entry per spatial axis")
        for row in self.H:
            if len(row) != M:
                raise ValueError("H must be an M x M nested list")
        for k in range(M):
            for i in range(M):
                if not np.array_equal(self.H[k][i], self.H[i][k]):
                    raise ValueError(f"H is not symmetric at ({k}, {i})")
        for name, arr in self.fields():
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"coefficient {name} has non-finite entries")

    def fields(self):
        """Yield ``(name, array)`` for every distinct coefficient field."""
        M = self.grid.dim
        yield "A", self.A
        yield "B", self.B
        yield "C", self.C
        for k in range(M):
            yield f"D{k}", self.D[k]
        for k in range(M):
            yield f"E{k}", self.E[k]
        for k in range(M):
            for i in range(k, M):
                yield f"H{k}{i}", self.H[k][i]

    def at(self, index: int) -> "CoefficientSet":
        """Slice one time level out of a time-indexed set."""
        M = self.grid.dim
        pick = lambda x: np.broadcast_to(x, np.broadcast_shapes(np.shape(x), np.shape(self.A)))[index]
        H = [[None] * M for _ in range(M)]
        for k in range(M):
            for i in range(k, M):
                H[k][i] = H[i][k] = pick(self.H[k][i])
        return CoefficientSet(
            self.grid,
            pick(self.A),
            pick(self.B),
            pick(self.C),
            [pick(d) for d in self.D],
            [pick(e) for e in self.E],
            H,
            None if self.times is None else np.atleast_1d(self.times)[index],
        )

    @classmethod
    def constant(cls, grid: Grid, A=1.0, B=1.0, C=0.0, D=None, E=None, H=None):
        """Spatially constant coefficients broadcast to full fields."""
        M = grid.dim
        full = lambda v: np.full(grid.shape, float(v))
        D = [0.0] * M if D is None else D
        E = [0.0] * M if E is None else E
        Hm = np.zeros((M, M)) if H is None else np.asarray(H, dtype=float).reshape(M, M)
        Hf = [[None] * M for _ in range(M)]
        for k in range(M):
            for i in range(k, M):
                Hf[k][i] = Hf[i][k] = full(Hm[k, i])
        return cls(grid, full(A), full(B), full(C), [full(d) for d in D], [full(e) for e in E], Hf)

    def apply(self, h: SpaceTimeField, t_index: int | None = None) -> np.ndarray:
        """Apply the linear operator to ``h`` with the lattice stencils."""
        jet = space_time_jet(h, t_index)
        return _zero_boundary(self.apply_jet(jet), h.grid)

    def apply_jet(self, jet: Jet) -> np.ndarray:
        M = self.grid.dim
        out = self.A * jet.u_tt - self.B * jet.lap + self.C * jet.u_t
        for k in range(M):
            out = out + self.D[k] * jet.grad[k] + self.E[k] * jet.grad_t[k]
            for i in range(M):
                out = out + self.H[k][i] * jet.hess[k][i]
        return out

    def wave_speed_sq(self) -> float:
        """Largest ``(B + |H|) / A`` over the lattice."""
        if np.any(self.A <= 0):
            raise ValueError("wave coefficient A must be positive")
        Habs = sum(np.abs(self.H[k][i]) for k in range(self.grid.dim) for i in range(self.grid.dim))
        return float(np.max((self.B + Habs) / self.A))


def assemble_coefficients(jet: Jet, slope) -> CoefficientSet:
    """Exact derivative of :func:`operator_from_jet` with respect to the jet."""
    M = jet.grid.dim
    a = [slope[k] + jet.grad[k] for k in range(M)]
    a_sq = sum(ak * ak for ak in a)
    q = jet.u_t
    lap = jet.lap
    a_dot_p = sum(a[k] * jet.grad_t[k] for k in range(M))
    hess_a = [sum(jet.hess[k][i] * a[i] for i in range(M)) for k in range(M)]
    A = 1.0 + a_sq
    B = 1.0 + a_sq - q * q
    C = 2.0 * (q * lap - a_dot_p)
    D = [2.0 * a[k] * (jet.u_tt - lap) - 2.0 * q * jet.grad_t[k] + 2.0 * hess_a[k] for k in range(M)]
    E = [-2.0 * q * a[k] for k in range(M)]
    H = [[None] * M for _ in range(M)]
    for k in range(M):
        for i in range(k, M):
            H[k][i] = H[i][k] = a[k] * a[i]
    shape = np.shape(A)
    bc = lambda x: np.broadcast_to(x, shape).copy()
    return CoefficientSet(
        jet.grid, bc(A), bc(B), bc(C), [bc(d) for d in D], [bc(e) for e in E],
        _sym([[bc(H[k][i]) for i in range(M)] for k in range(M)]),
    )


def _sym(H):
    M = len(H)
    for k in range(M):
        for i in range(k + 1, M):
            H[i][k] = H[k][i]
    return H


def linearize(w: SpaceTimeField, hp: HyperplaneParams, t_index: int | None = None) -> CoefficientSet:
    """Coefficients of the Gateaux derivative of the perturbation operator at ``w``.

    With ``t_index=None`` the set carries every interior level ``1..n_t-2``.
    At ``w = 0`` it reduces to the flat operator
    ``(1+|A|^2)(h_tt - lap h) + A_k A_i d_k d_i h``.
    """
    jet = space_time_jet(w, t_index)
    coeffs = assemble_coefficients(jet, _slope(hp, w.grid.dim))
    times = w.times[1:-1] if t_index is None else w.times[t_index]
    coeffs.times = times
    return coeffs


# ---------------------------------------------------------------------------
# closed-form coefficients at the initial approximation


def time_envelope(t, p: float):
    """``g(t) = t^2 (t^4+1)^(-p)`` with its first two derivatives."""
    t = np.asarray(t, dtype=float)
    s = t**4 + 1.0
    g = t**2 * s ** (-p)
    g1 = 2.0 * t * s ** (-p - 1.0) * (1.0 + (1.0 - 2.0 * p) * t**4)
    # d/dt of 2t(1+(1-2p)t^4) s^(-p-1)
    g2 = (
        (2.0 + 10.0 * (1.0 - 2.0 * p) * t**4) * s ** (-p - 1.0)
        - 8.0 * (p + 1.0) * t**4 * (1.0 + (1.0 - 2.0 * p) * t**4) * s ** (-p - 2.0)
    )
    return g, g1, g2


def dissipation_onset(p: float) -> float:
    """Time ``(2p-1)^(-1/4)`` after which the linearized damping is positive."""
    if not p > 0.5:
        raise ValueError(f"p must exceed 1/2, got {p}")
    return (2.0 * p - 1.0) ** -0.25


def init_linearization(
    p: float,
    profile: np.ndarray,
    hp: HyperplaneParams,
    t: float,
    grid: Grid,
    *,
    as_printed: bool = False,
) -> CoefficientSet:
    """Closed-form coefficients A1..A6 at ``w0(t, x) = g(t) * profile(x)``.

    Slot mapping: A1 -> A, A2 -> B, A4 -> C, A5 -> D, A6 -> E, A3 -> H.
    Spatial derivatives of ``profile`` use the grid stencils; time
    derivatives of ``g`` are exact.

    The ``w0^2`` term inside the gradient bracket of A5 is evaluated with
    coefficient 8, the value obtained by differentiating the operator.  Pass
    ``as_printed=True`` to use the coefficient 4 instead.
    """
    if not p > 0.5:
        raise ValueError(f"p must exceed 1/2, got {p}")
    profile = grid.check(profile, "profile")
    M = grid.dim
    slope = _slope(hp, M)
    g, _, g2 = (float(x) for x in time_envelope(t, p))
    s = t**4 + 1.0
    damp = 4.0 * t * s ** (-p - 1.0) * ((2.0 * p - 1.0) * t**4 - 1.0)
    grad0 = gradient(profile, grid)
    hess0 = hessian(profile, grid)
    lap0 = sum(hess0[k][k] for k in range(M))
    a = [slope[k] + g * grad0[k] for k in range(M)]
    a_sq = sum(ak * ak for ak in a)
    A1 = 1.0 + a_sq
    A2 = 1.0 + a_sq - 4.0 * t**2 * (1.0 + (1.0 - 2.0 * p) * t**4) ** 2 * s ** (-2.0 * (p + 1.0)) * profile**2
    A4 = damp * (sum(a[k] * grad0[k] for k in range(M)) - g * profile * lap0)
    A6 = [damp * profile * a[k] for k in range(M)]
    coef = 4.0 if as_printed else 8.0
    # the gradient bracket is expanded by the chain rule on the stencil level
    #   1/2 grad(g |grad w0|^2 - coef s^(-p-2) (1+(1-2p)t^4)^2 w0^2 + 2 A.grad w0)
    lam = coef * s ** (-p - 2.0) * (1.0 + (1.0 - 2.0 * p) * t**4) ** 2
    A5 = []
    for k in range(M):
        half_grad = (
            g * sum(grad0[i] * hess0[k][i] for i in range(M))
            - lam * profile * grad0[k]
            + sum(slope[i] * hess0[k][i] for i in range(M))
        )
        transport = sum(a[i] * hess0[k][i] for i in range(M))
        # g * (g''/g) is written as g'' so the bracket stays finite at t = 0
        accel = 2.0 * a[k] * (g2 * profile - g * lap0)
        A5.append(g * (half_grad + transport) + accel)
    bc = lambda x: np.broadcast_to(x, grid.shape).copy()
    H = [[bc(a[k] * a[i]) for i in range(M)] for k in range(M)]
    return CoefficientSet(
        grid, bc(A1), bc(A2), bc(A4), [bc(x) for x in A5], [bc(x) for x in A6],
        _sym(H), times=np.float64(t),
    )


# ---------------------------------------------------------------------------
# quadratic remainder


def remainder(h: SpaceTimeField, hp: HyperplaneParams, t_index: int | None = None) -> np.ndarray:
    """Quadratic and cubic part of the perturbation operator at ``w = 0``.

    Term by term::

        (2A.grad h + |grad h|^2) h_tt - (2A.grad h + |grad h|^2 - h_t^2) lap h
        - 1/2 h_t d_t((grad h + 2A).grad h)
        + 1/2 sum_k (d_k h + A_k) d_k(|grad h|^2 - h_t^2)
        + sum_k d_k h (A . grad d_k h)

    with ``d_t`` and ``d_k`` of the quadratic forms expanded by the chain rule.
    """
    jet = space_time_jet(h, t_index)
    M = h.grid.dim
    A = _slope(hp, M)
    g = jet.grad
    P = jet.grad_t
    q = jet.u_t
    Hs = jet.hess
    two_a_g = 2.0 * sum(A[k] * g[k] for k in range(M))
    g_sq = sum(gk * gk for gk in g)
    out = (two_a_g + g_sq) * jet.u_tt - (two_a_g + g_sq - q * q) * jet.lap
    out = out - q * sum((g[k] + A[k]) * P[k] for k in range(M))
    for k in range(M):
        half_dk = sum(g[i] * Hs[k][i] for i in range(M)) - q * P[k]
        out = out + (g[k] + A[k]) * half_dk
        out = out + g[k] * sum(A[i] * Hs[i][k] for i in range(M))
    return _zero_boundary(out, h.grid)


# ---------------------------------------------------------------------------
# assumption checks


@dataclass
class AssumptionReport:
    """Outcome of :func:`check_assumptions`.

    ``checks`` maps a condition name to pass/fail, ``sigma_margin`` is the
    smallest slack among the order conditions on A, B and |H| and
    ``eps_scale`` is the largest ratio (size of an epsilon-type quantity) / eps.
    """

    checks: dict
    sigma_margin: float
    eps_scale: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def failures(self) -> list[str]:
        return [name for name, ok in self.checks.items() if not ok]


def check_assumptions(
    c: CoefficientSet,
    sigma: float,
    sigma0: float,
    eps: float,
    *,
    K: float = 10.0,
    damping_from: float | None = None,
    derivative_orders: tuple[int, ...] = (1, 2),
    mask: np.ndarray | None = None,
) -> AssumptionReport:
    """Pointwise check of the coefficient hypotheses of the linear damped problem.

    Conditions: ``sigma0 > A > sigma > 1``, ``B > sigma``, ``C >= 0``,
    ``H`` symmetric with positive entries and ``sum |H_ki| <= sigma``,
    ``sum |D_k| <= K eps``, ``sum |E_k| <= K eps`` and every listed spatial
    derivative order (plus the first time derivative when the set is
    time-indexed) of every coefficient bounded by ``K eps``.

    ``damping_from`` restricts the damping sign condition to levels with
    ``t >= damping_from``; ``mask`` restricts every check to a node subset.
    """
    if not 1.0 < sigma < sigma0:
        raise ValueError(f"need 1 < sigma < sigma0, got sigma={sigma}, sigma0={sigma0}")
    grid = c.grid
    M = grid.dim
    sel = (lambda x: np.broadcast_to(x, np.shape(c.A))[..., mask]) if mask is not None else (
        lambda x: np.broadcast_to(x, np.shape(c.A))
    )
    A, B, C = sel(c.A), sel(c.B), sel(c.C)
    Habs = sum(np.abs(sel(c.H[k][i])) for k in range(M) for i in range(M))
    Dabs = sum(np.abs(sel(d)) for d in c.D)
    Eabs = sum(np.abs(sel(e)) for e in c.E)
    checks = {}
    checks["A_upper"] = bool(np.all(A < sigma0))
    checks["A_lower"] = bool(np.all(A > sigma))
    checks["B_lower"] = bool(np.all(B > sigma))
    if damping_from is not None and c.times is not None and np.ndim(c.A) > M:
        keep = np.asarray(c.times) >= damping_from
        checks["C_nonnegative"] = bool(np.all(C[keep] >= 0.0))
    elif damping_from is not None and c.times is not None and float(c.times) < damping_from:
        checks["C_nonnegative"] = True
    else:
        checks["C_nonnegative"] = bool(np.all(C >= 0.0))
    checks["H_bound"] = bool(np.all(Habs <= sigma))
    checks["H_positive"] = all(bool(np.all(sel(c.H[k][i]) > 0)) for k in range(M) for i in range(M))
    bound = K * eps
    checks["D_small"] = bool(np.all(Dabs <= bound))
    checks["E_small"] = bool(np.all(Eabs <= bound))

    deriv_max = 0.0
    worst = None
    for name, arr in c.fields():
        arr = np.broadcast_to(arr, np.shape(c.A))
        for order in derivative_orders:
            for alpha in _orders(M, order):
                d = partial(arr, grid, alpha)
                d = d[..., mask] if mask is not None else d
                val = float(np.max(np.abs(d)))
                if val > deriv_max:
                    deriv_max, worst = val, (name, alpha)
        if c.times is not None and np.ndim(arr) > M and arr.shape[0] >= 2:
            tt = np.asarray(c.times, dtype=float)
            d = np.gradient(arr, tt, axis=0)
            d = d[..., mask] if mask is not None else d
            val = float(np.max(np.abs(d)))
            if val > deriv_max:
                deriv_max, worst = val, (name, "t")
    checks["derivatives_small"] = deriv_max <= bound

    margins = [
        float(np.min(A - sigma)),
        float(np.min(sigma0 - A)),
        float(np.min(B - sigma)),
        float(np.min(sigma - Habs)),
    ]
    eps_scale = max(float(np.max(Dabs)), float(np.max(Eabs)), deriv_max) / eps if eps > 0 else np.inf
    return AssumptionReport(
        checks,
        min(margins),
        eps_scale,
        {"worst_derivative": worst, "max_derivative": deriv_max, "K": K},
    )


def _orders(dim: int, order: int):
    return [a for a in multi_indices(dim, order) if sum(a) == order]


# ---------------------------------------------------------------------------
# conserved and invariant functionals


def mass_density(u_t: np.ndarray, grad_u) -> np.ndarray:
    """``u_t / sqrt(1 - u_t^2 + |grad u|^2)``; raises on non-timelike points."""
    margin = 1.0 - u_t * u_t + sum(g * g for g in grad_u)
    if np.any(margin <= 0):
        raise ValueError(f"causal margin not positive (min {float(np.min(margin)):.3e})")
    return u_t / np.sqrt(margin)


def mass_functional(u: SpaceTimeField, t_index: int, slope=None) -> float:
    """Box quadrature of the conserved mass density at level ``t_index``.

    ``slope`` adds an affine background ``slope . x`` to the spatial gradient,
    so a perturbation field can be passed directly.
    """
    jet = space_time_jet(u, t_index)
    grid = u.grid
    s = np.zeros(grid.dim) if slope is None else np.asarray(slope, dtype=float)
    grad_u = [s[k] + jet.grad[k] for k in range(grid.dim)]
    return float(integrate(mass_density(jet.u_t, grad_u), grid))


def rescale(u: SpaceTimeField, lam: float) -> SpaceTimeField:
    """``lam * u(t/lam, x/lam)`` resampled on the same lattice by linear interpolation."""
    if not lam > 0:
        raise ValueError(f"scale factor must be positive, got {lam}")
    if lam == 1.0:
        return u.copy()
    grid = u.grid
    times = u.times
    src_t = times / lam
    src_x = grid.axis / lam
    tol = 1e-12 * max(1.0, abs(times[-1]))
    if src_t.min() < times[0] - tol or src_t.max() > times[-1] + tol or np.abs(src_x).max() > grid.half_width * (1 + 1e-12):
        raise ValueError(f"rescaling by {lam} needs samples outside the lattice")
    interp = RegularGridInterpolator((times,) + (grid.axis,) * grid.dim, u.values)
    pts = np.meshgrid(np.clip(src_t, times[0], times[-1]), *([np.clip(src_x, grid.axis[0], grid.axis[-1])] * grid.dim), indexing="ij")
    pts = np.stack([p.ravel() for p in pts], axis=-1)
    values = lam * interp(pts).reshape(u.values.shape)
    return SpaceTimeField(grid, u.dt, values, u.t0)
