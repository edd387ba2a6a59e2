import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from membrane_lab.grid import Grid, SpaceTimeField, sobolev_norm
from membrane_lab.smoothing import SmoothingSchedule, cutoff_mask, estimate_check, lowpass, mode_wavenumbers

G = Grid(1, 10.0, 64)


def _l2(u):
    return float(np.sqrt(np.sum(u * u)))


def test_constant_passes_unchanged():
    u = np.full(G.shape, 3.5)
    assert np.allclose(lowpass(u, 0.5, G), u, atol=1e-13)


def test_high_cosine_mode_removed():
    # the cosine mode j is the DCT-II basis vector cos(pi j (i + 1/2) / n)
    n = G.points
    j = 40
    i = np.arange(n)
    u = np.cos(np.pi * j * (i + 0.5) / n)
    N = mode_wavenumbers(G)[j] / 2
    assert np.max(np.abs(lowpass(u, N, G))) < 1e-12
    low = np.cos(np.pi * 3 * (i + 0.5) / n)
    assert np.allclose(lowpass(low, N, G), low, atol=1e-12)


def test_cutoff_mask_is_product_box():
    g = Grid(2, 1.0, 16)
    m = cutoff_mask(g, mode_wavenumbers(g)[3])
    assert m.sum() == 16
    assert m[3, 3] and not m[4, 0]


fields = arrays(np.float64, 64, elements=st.floats(-5, 5, allow_nan=False, allow_subnormal=False))


@settings(max_examples=60, deadline=None)
@given(fields, st.floats(0.1, 20))
def test_projector_idempotent_and_l2_contracting(u, N):
    pu = lowpass(u, N, G)
    assert np.allclose(lowpass(pu, N, G), pu, atol=1e-10 * (1 + np.max(np.abs(u))))
    assert _l2(pu) <= _l2(u) * (1 + 1e-12) + 1e-12


@settings(max_examples=30, deadline=None)
@given(fields, st.floats(0.1, 5), st.floats(1.0, 4.0))
def test_nested_cutoffs_compose_to_the_smaller(u, N, factor):
    a = lowpass(lowpass(u, N * factor, G), N, G)
    assert np.allclose(a, lowpass(u, N, G), atol=1e-10 * (1 + np.max(np.abs(u))))


def test_space_time_field_filtering():
    g = Grid(1, 5.0, 32)
    rng = np.random.default_rng(1)
    f = SpaceTimeField(g, 0.1, rng.standard_normal((12,) + g.shape))
    p = lowpass(f, 2.0, time_smoothing=False)
    assert np.allclose(p.values[3], lowpass(f.values[3], 2.0, g))
    q = lowpass(f, 2.0)
    assert q.values.shape == f.values.shape
    # time smoothing lowers the level-to-level variation
    assert np.std(np.diff(q.values, axis=0)) < np.std(np.diff(p.values, axis=0))


def test_lowpass_argument_errors():
    with pytest.raises(ValueError):
        lowpass(np.zeros(64), 0.0, G)
    with pytest.raises(ValueError):
        lowpass(np.zeros(64), 1.0)
    with pytest.raises(ValueError):
        lowpass(np.zeros(63), 1.0, G)


def test_estimate_check_zero_field_note():
    rep = estimate_check(G.zeros(), 4.0, 1, 0, G)
    assert rep.smoothing == 0.0 and rep.approximation == 0.0 and rep.note == "zero field"


def test_estimate_check_definitions():
    g = Grid(1, 10.0, 257)
    rng = np.random.default_rng(2)
    u = rng.standard_normal(g.shape)
    N = 4.0
    rep = estimate_check(u, N, 2, 1, g)
    pu = lowpass(u, N, g)
    assert math.isclose(rep.smoothing, sobolev_norm(pu, g, 2) / (N * sobolev_norm(u, g, 1)))
    assert math.isclose(rep.approximation, N * sobolev_norm(u - pu, g, 1) / sobolev_norm(u, g, 2))


def test_smoothing_ratio_bounded_on_band_limited_data():
    # below the cutoff the projector is the identity, so the smoothing
    # ratio is ||u||_{s1} / (N^(s1-s2) ||u||_{s2}) which stays O(1) for
    # a single low mode of wavenumber comparable to N
    g = Grid(1, 10.0, 257)
    x = g.coords[0]
    for N in (1.0, 2.0, 4.0):
        u = np.cos(0.9 * N * x)
        rep = estimate_check(u, N, 1, 0, g)
        assert 0.3 < rep.smoothing < 1.5


@pytest.mark.parametrize("s1,s2", [(0, 1), (1, -1), (7, 0)])
def test_estimate_check_order_validation(s1, s2):
    with pytest.raises(ValueError):
        estimate_check(np.ones(64), 2.0, s1, s2, G)


def test_schedule():
    s = SmoothingSchedule(2.0, 4)
    assert list(s) == [1.0, 2.0, 4.0, 8.0, 16.0]
    assert len(s) == 5
    with pytest.raises(IndexError):
        s.N(5)
    with pytest.raises(ValueError):
        SmoothingSchedule(1.0, 3)
    with pytest.raises(ValueError):
        SmoothingSchedule(2.0, -1)
