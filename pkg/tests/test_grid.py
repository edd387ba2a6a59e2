import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from membrane_lab.grid import (
    MAX_SOBOLEV_ORDER,
    Grid,
    SpaceTimeField,
    diff_ops,
    gradient,
    integrate,
    integrate_weighted,
    laplacian,
    mixed,
    multi_indices,
    sobolev_norm,
    sponge_profile,
    trapezoid_weights,
)


def test_affine_gradient_exact_everywhere():
    g = Grid(2, 2.0, 17)
    x, y = g.coords
    u = 0.75 * x - 0.5 * y + 3.0
    gx, gy = gradient(u, g)
    assert np.array_equal(gx, np.full(g.shape, 0.75))
    assert np.array_equal(gy, np.full(g.shape, -0.5))


def test_laplacian_of_quadratic_including_boundary():
    g = Grid(1, 1.0, 33)
    x = g.coords[0]
    assert np.allclose(laplacian(x**2, g), 2.0, atol=1e-10)
    g2 = Grid(3, 1.0, 9)
    x, y, z = g2.coords
    assert np.allclose(laplacian(x * x + y * y - 2 * z * z, g2), 0.0, atol=1e-10)


@pytest.mark.parametrize("request_", ["gradient", "laplacian"])
def test_diff_ops_dispatch(request_):
    g = Grid(2, 1.0, 16)
    u = np.sin(g.coords[0]) * np.cos(g.coords[1])
    out = diff_ops(u, g, request_)
    ref = gradient(u, g) if request_ == "gradient" else laplacian(u, g)
    if request_ == "gradient":
        for a, b in zip(out, ref):
            assert np.array_equal(a, b)
    else:
        assert np.array_equal(out, ref)


def test_diff_ops_rejects_bad_requests():
    g = Grid(2, 1.0, 16)
    u = g.zeros()
    with pytest.raises(IndexError):
        diff_ops(u, g, ("mixed", 0, 2))
    with pytest.raises(ValueError):
        diff_ops(u, g, "curl")
    with pytest.raises(ValueError):
        diff_ops(np.zeros((3, 3)), g, "gradient")
    bad = u.copy()
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        diff_ops(bad, g, "laplacian")


def test_mixed_derivative_symmetric_bitwise():
    g = Grid(3, 1.0, 12)
    rng = np.random.default_rng(3)
    u = rng.standard_normal(g.shape)
    for k in range(3):
        for i in range(3):
            assert np.array_equal(mixed(u, g, k, i), mixed(u, g, i, k))


def test_central_difference_order_on_sine():
    errs, hs = [], []
    for n in (64, 128, 256):
        g = Grid(1, 1.0, n)
        x = g.coords[0]
        d = gradient(np.sin(2 * x), g)[0]
        errs.append(np.max(np.abs(d - 2 * np.cos(2 * x))))
        hs.append(g.spacing)
    q = [math.log(errs[i] / errs[i + 1]) / math.log(hs[i] / hs[i + 1]) for i in range(2)]
    assert all(1.8 <= v <= 2.2 for v in q)


def test_trapezoid_weights_sum_to_volume():
    for dim in (1, 2, 3):
        g = Grid(dim, 1.5, 10)
        assert math.isclose(trapezoid_weights(g).sum(), g.volume, rel_tol=1e-12)


def test_sobolev_norm_of_zero_and_constant():
    g = Grid(2, 1.0, 20)
    assert sobolev_norm(g.zeros(), g, 3) == 0.0
    c = -2.5
    for s in range(4):
        assert math.isclose(sobolev_norm(np.full(g.shape, c), g, s), abs(c) * math.sqrt(g.volume), rel_tol=1e-12)


def test_h1_norm_of_sine_matches_closed_form():
    # on [-pi, pi]: int sin^2 + cos^2 = 2 pi
    g = Grid(1, math.pi, 256)
    u = np.sin(g.coords[0])
    assert math.isclose(sobolev_norm(u, g, 1), math.sqrt(2 * math.pi), rel_tol=0.01)


def test_sobolev_norm_keeps_leading_axes():
    g = Grid(1, 1.0, 16)
    block = np.stack([np.full(g.shape, 1.0), np.full(g.shape, 3.0)])
    n = sobolev_norm(block, g, 1)
    assert n.shape == (2,)
    assert math.isclose(n[1] / n[0], 3.0)


def test_sobolev_norm_order_validation():
    g = Grid(1, 1.0, 16)
    with pytest.raises(ValueError):
        sobolev_norm(g.zeros(), g, -1)
    with pytest.raises(ValueError):
        sobolev_norm(g.zeros(), g, 1.5)
    with pytest.raises(ValueError):
        sobolev_norm(g.zeros(), g, MAX_SOBOLEV_ORDER + 1)


def test_sobolev_mask_restricts_quadrature():
    g = Grid(1, 1.0, 33)
    u = np.ones(g.shape)
    m = g.box_mask(0.5)
    assert sobolev_norm(u, g, 0, mask=m) < sobolev_norm(u, g, 0)
    assert sobolev_norm(u, g, 0, mask=np.zeros(g.shape, bool)) == 0.0


field_1d = arrays(np.float64, 24, elements=st.floats(-10, 10, allow_nan=False, allow_subnormal=False))


@settings(max_examples=60, deadline=None)
@given(field_1d, field_1d, st.floats(-5, 5, allow_nan=False), st.integers(0, 3))
def test_norm_homogeneous_and_subadditive(u, v, lam, s):
    g = Grid(1, 2.0, 24)
    nu, nv = sobolev_norm(u, g, s), sobolev_norm(v, g, s)
    assert math.isclose(sobolev_norm(lam * u, g, s), abs(lam) * nu, rel_tol=1e-9, abs_tol=1e-12)
    assert sobolev_norm(u + v, g, s) <= nu + nv + 1e-9 * (1 + nu + nv)


@settings(max_examples=40, deadline=None)
@given(field_1d)
def test_norm_monotone_in_order(u):
    g = Grid(1, 2.0, 24)
    norms = [sobolev_norm(u, g, s) for s in range(5)]
    assert all(a <= b * (1 + 1e-12) + 1e-300 for a, b in zip(norms, norms[1:]))


def test_multi_indices_count():
    # number of alpha in N^M with |alpha| <= s is C(s + M, M)
    for dim in (1, 2, 3):
        for s in range(4):
            assert len(list(multi_indices(dim, s))) == math.comb(s + dim, dim)


def test_integrate_weighted_gaussian_second_order():
    # int x^2 exp(-x^2) = sqrt(pi)/2; trapezoid on decaying smooth data is
    # far better than O(dx^2), so dx^2 is a loose upper bound
    for n in (32, 64, 128):
        g = Grid(1, 6.0, n)
        x = g.coords[0]
        val = integrate_weighted(np.exp(-x * x), x * x, g)
        assert abs(val - 0.5 * math.sqrt(math.pi)) < g.spacing**2


def test_integrate_weighted_shape_mismatch():
    g = Grid(1, 1.0, 16)
    with pytest.raises(ValueError):
        integrate_weighted(g.zeros(), np.ones(15), g)


def test_integrate_keeps_time_axis():
    g = Grid(2, 1.0, 9)
    block = np.ones((3,) + g.shape)
    assert np.allclose(integrate(block, g), g.volume)


@pytest.mark.parametrize(
    "kwargs",
    [dict(dim=4), dict(points=7), dict(half_width=0.0), dict(half_width=-1.0), dict(points=16, sponge_width=4)],
)
def test_grid_validation(kwargs):
    with pytest.raises(ValueError):
        Grid(**kwargs)


def test_grid_spacing_and_axis():
    g = Grid(1, 10.0, 129)
    assert g.spacing == 20.0 / 128
    assert g.axis[0] == -10.0 and g.axis[-1] == 10.0


def test_sponge_profile_shape():
    assert not np.any(sponge_profile(Grid(1, 1.0, 64)))
    g = Grid(1, 1.0, 64, sponge_width=8)
    s = sponge_profile(g, 3.0)
    assert s[0] == 3.0 and s[-1] == 3.0
    assert not np.any(s[8:-8])
    assert np.all(np.diff(s[:9]) <= 0)


def test_space_time_field_validation():
    g = Grid(1, 1.0, 8)
    with pytest.raises(ValueError):
        SpaceTimeField(g, 0.1, np.zeros((1, 8)))
    with pytest.raises(ValueError):
        SpaceTimeField(g, 0.0, np.zeros((2, 8)))
    with pytest.raises(ValueError):
        SpaceTimeField(g, 0.1, np.zeros((2, 9)))
    f = SpaceTimeField.from_function(lambda t, x: t + 0 * x, g, 0.25, 3, t0=1.0)
    assert np.allclose(f.times, [1.0, 1.25, 1.5])
    assert np.allclose(f.values[:, 0], f.times)
