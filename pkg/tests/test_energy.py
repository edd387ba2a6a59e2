import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from membrane_lab.energy import (
    WeightPair,
    decay_constant,
    decay_rate,
    energy_report,
    gronwall_monitor,
    hs_energy,
    weight_check,
    weighted_energy,
)
from membrane_lab.grid import Grid
from membrane_lab.membrane_ops import CoefficientSet
from membrane_lab.solvers import LinearProblem, solve_linear_damped

T_GRID = np.linspace(0.0, 20.0, 201)


def test_standard_weights_pass():
    out = weight_check(WeightPair(1.5), 1.5, T_GRID)
    assert all(out["checks"].values())
    assert out["margins"]["phi_decay"] == 0.0 and out["margins"]["bar_convex"] == 0.0


def test_too_large_c_breaks_phibar_below_phi():
    out = weight_check(WeightPair(3.0), 3.0, T_GRID)
    assert not out["checks"]["bar_below_phi"]
    assert out["margins"]["bar_below_phi"] < 0


def test_growing_weight_fails_decay_conditions():
    w = WeightPair(1.5, phi_rate=-0.1, bar_rate=-0.1)
    out = weight_check(w, 1.5, T_GRID)
    assert not out["checks"]["phi_decay"] and not out["checks"]["bar_decay"]


def test_weight_check_rejects_small_c():
    with pytest.raises(ValueError):
        weight_check(WeightPair(), 1.0, T_GRID)


def test_decay_constant_positive_and_decreasing_in_eps():
    vals = [decay_constant(1.5, 1.5, e) for e in (0.0, 0.01, 0.05)]
    assert all(v > 0 for v in vals)
    assert vals[0] > vals[1] > vals[2]
    assert math.isclose(vals[0], min(1.5**2 * 1.5, 1.5 * (1.5 * 1.5 - 1), 2 * 1.5 + 1.5**2 * 1.5 - 1))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 3.0), st.floats(0.1, 100.0), st.floats(0.0, 0.5))
def test_decay_rate_recovers_synthetic_exponential(lam, amp, drop):
    t = np.linspace(0, 10, 200)
    rate, resid = decay_rate(t, amp * np.exp(-lam * t), drop)
    assert abs(rate - lam) < 1e-6 and resid < 1e-8


def test_decay_rate_of_constant_is_zero():
    t = np.linspace(0, 10, 50)
    rate, resid = decay_rate(t, np.full(50, 2.0))
    assert abs(rate) < 1e-12 and resid < 1e-12


def test_decay_rate_input_errors():
    t = np.linspace(0, 1, 20)
    with pytest.raises(ValueError):
        decay_rate(t, np.zeros(20))
    with pytest.raises(ValueError):
        decay_rate(t[:5], np.ones(5))
    with pytest.raises(ValueError):
        decay_rate(t, np.ones(19))


def test_weighted_energy_of_sine():
    g = Grid(1, math.pi, 512)
    x = g.coords[0]
    h = np.sin(x)
    # int sin^2 + cos^2 = 2 pi
    assert math.isclose(weighted_energy(h, g.zeros(), WeightPair(), 0.0, g), 2 * math.pi, rel_tol=1e-3)
    assert math.isclose(
        weighted_energy(h, g.zeros(), WeightPair(), 1.0, g), 2 * math.pi * math.exp(-1.5), rel_tol=1e-3
    )


def test_hs_energy_scales_like_wavenumber_power():
    g = Grid(1, math.pi, 1024)
    x = g.coords[0]
    k = 3
    h = np.sin(k * x)
    e0 = hs_energy(h, g.zeros(), WeightPair(), 0.0, g, 0)
    e1 = hs_energy(h, g.zeros(), WeightPair(), 0.0, g, 1)
    assert math.isclose(e1 / e0, k**2, rel_tol=0.02)
    with pytest.raises(ValueError):
        hs_energy(h, g.zeros(), WeightPair(), 0.0, g, -1)


def _run(C, T=10.0, data_scale=1.0):
    g = Grid(1, 5.0, 64)
    x = g.coords[0]
    cs = CoefficientSet.constant(g, A=2.0, B=2.0, C=C, H=0.1)
    return solve_linear_damped(LinearProblem(cs, data_scale * np.exp(-x * x), g.zeros(), T, 0.05, sponge=False), g)


def test_gronwall_zero_problem_has_no_violations():
    assert gronwall_monitor(_run(1.0, data_scale=0.0), WeightPair(), 0.75) == 0


def test_gronwall_damped_versus_anti_damped():
    assert gronwall_monitor(_run(1.0), WeightPair(), 0.75) == 0
    assert gronwall_monitor(_run(-2.0, T=5.0), WeightPair(), 0.75) > 0


def test_energy_report_fields():
    r = _run(1.0)
    rep = energy_report(r, WeightPair(), s_values=(1, 2))
    assert rep.weighted.shape == rep.plain.shape == r.times.shape
    assert set(rep.sobolev) == {1, 2}
    assert rep.rate > 0 and np.isfinite(rep.residual)
