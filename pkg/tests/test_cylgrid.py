import numpy as np
import pytest
from hypothesis import given, strategies as st

from axiboussinesq.cylgrid import (EVEN, ODD, ScalarFieldRZ, VelocityRZ, ghost_value, h_norms,
                                   integrate, lp_norm, make_grid, pad)
from axiboussinesq.errors import GridMismatchError, InvalidDimensionError, ParityMismatchError
from axiboussinesq.random_fields import random_bump_fields

GAUSS_L2 = np.sqrt(np.pi / 2 * np.sqrt(np.pi / 2))   # ||exp(-r^2-z^2)||_2 on R^3


@pytest.fixture(scope="module")
def g():
    return make_grid(32, 64, 4.0, -4.0, 4.0)


def test_grid_geometry():
    g = make_grid(4, 8, 1.0, -1.0, 1.0)
    np.testing.assert_allclose(g.r, [0.125, 0.375, 0.625, 0.875])
    assert g.dz == pytest.approx(0.25)
    assert g.z[0] == pytest.approx(-0.875)
    # midpoint weights integrate 1 exactly to the cylinder volume
    assert integrate(g, np.ones(g.shape)) == pytest.approx(2 * np.pi)


@pytest.mark.parametrize("args", [
    (2, 8, 1.0, -1.0, 1.0),
    (8, 3, 1.0, -1.0, 1.0),
    (8, 8, 0.0, -1.0, 1.0),
    (8, 8, 1.0, 1.0, 1.0),
    (8.5, 8, 1.0, -1.0, 1.0),
])
def test_make_grid_rejects(args):
    with pytest.raises(InvalidDimensionError):
        make_grid(*args)


def test_make_grid_unknown_bc():
    with pytest.raises(InvalidDimensionError):
        make_grid(8, 8, 1.0, -1.0, 1.0, "neumann")


def test_field_validation(g):
    with pytest.raises(InvalidDimensionError):
        ScalarFieldRZ(g, np.zeros((3, 3)))
    with pytest.raises(ParityMismatchError):
        ScalarFieldRZ(g, np.zeros(g.shape), "sideways")
    with pytest.raises(ValueError):
        ScalarFieldRZ(g, np.full(g.shape, np.nan))
    other = make_grid(16, 16, 1.0, -1.0, 1.0)
    with pytest.raises(GridMismatchError):
        ScalarFieldRZ.zeros(g) + ScalarFieldRZ.zeros(other)
    with pytest.raises(ParityMismatchError):
        ScalarFieldRZ.zeros(g) + ScalarFieldRZ.zeros(g, ODD)
    with pytest.raises(ParityMismatchError):
        VelocityRZ(ScalarFieldRZ.zeros(g, EVEN), ScalarFieldRZ.zeros(g, EVEN))


def test_values_are_read_only(g):
    f = ScalarFieldRZ.zeros(g)
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


def test_lp_norm_oracles():
    g = make_grid(16, 32, 1.0, -1.0, 1.0)
    assert lp_norm(ScalarFieldRZ.zeros(g)) == 0.0
    one = ScalarFieldRZ.from_function(g, lambda r, z: np.ones_like(r))
    assert lp_norm(one, 2) == pytest.approx(np.sqrt(2 * np.pi), rel=1e-14)
    assert lp_norm(one, np.inf) == 1.0


def test_gaussian_l2_converges_second_order():
    errs = []
    for n in (32, 64, 128):
        g = make_grid(n, 2 * n, 6.0, -6.0, 6.0)
        f = ScalarFieldRZ.from_function(g, lambda r, z: np.exp(-r**2 - z**2))
        errs.append(abs(lp_norm(f) - GAUSS_L2))
    assert errs[-1] < 5e-4   # h = 6/128
    order = np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])
    assert min(order) > 1.9


@given(c=st.floats(-1e3, 1e3, allow_nan=False), p=st.sampled_from([1.0, 2.0, 3.0, 6.0, np.inf]),
       seed=st.integers(0, 2**16))
def test_lp_norm_homogeneous(c, p, seed):
    g = make_grid(16, 32, 4.0, -4.0, 4.0)
    f = random_bump_fields(seed, 1)[0].sample(g)
    assert lp_norm(f * c, p) == pytest.approx(abs(c) * lp_norm(f, p), rel=1e-12, abs=1e-300)


@given(seed=st.integers(0, 2**16), p=st.sampled_from([1.0, 2.0, 4.0, np.inf]))
def test_lp_norm_monotone(seed, p):
    g = make_grid(16, 32, 4.0, -4.0, 4.0)
    f = random_bump_fields(seed, 1)[0].sample(g)
    shrink = np.random.default_rng(seed).uniform(0, 1, g.shape)
    assert lp_norm(f.values * shrink, p, g) <= lp_norm(f, p) * (1 + 1e-14)


def test_parity_ghosts(g):
    f = random_bump_fields(3, 1)[0].sample(g)
    np.testing.assert_array_equal(ghost_value(f), f.values[0])
    odd = f.with_values(f.values, ODD)
    np.testing.assert_array_equal(ghost_value(odd), -f.values[0])
    a = pad(odd.values, g, ODD)
    np.testing.assert_array_equal(a[0, 1:-1], -odd.values[0])


def test_extrapolated_ghost_exact_for_cubics(g):
    f = ScalarFieldRZ.from_function(g, lambda r, z: r**3 - 2 * z**3 + r * z)
    a = pad(f.values, g, EVEN)
    rg = g.rmax + 0.5 * g.dr
    np.testing.assert_allclose(a[-1, 1:-1], rg**3 - 2 * g.z**3 + rg * g.z, rtol=1e-10)


def test_h_norms():
    g = make_grid(32, 64, 1.0, -1.0, 1.0)
    const = ScalarFieldRZ.from_function(g, lambda r, z: np.full_like(r, 3.0))
    assert h_norms(const)[1] == pytest.approx(0.0, abs=1e-10)
    lin = ScalarFieldRZ.from_function(g, lambda r, z: z)
    assert h_norms(lin)[1] == pytest.approx(np.sqrt(2 * np.pi), rel=1e-12)


def test_h1_seminorm_refinement():
    # ||grad exp(-r^2-z^2)||_2^2 = 16 pi int rho^4 exp(-2 rho^2) d rho = 3 pi^1.5 / (2 sqrt 2)
    exact = np.sqrt(1.5 * np.pi**1.5 / np.sqrt(2))
    errs = []
    for n in (32, 64, 128):
        g = make_grid(n, 2 * n, 5.0, -5.0, 5.0)
        f = ScalarFieldRZ.from_function(g, lambda r, z: np.exp(-r**2 - z**2))
        errs.append(abs(h_norms(f)[1] - exact))
    assert errs[-1] < 1e-3 * exact
    assert min(np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])) > 1.9
