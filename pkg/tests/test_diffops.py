import numpy as np
import pytest
from hypothesis import given, strategies as st

from axiboussinesq import diffops
from axiboussinesq.cylgrid import EVEN, ODD, ScalarFieldRZ, VelocityRZ, lp_norm, make_grid
from axiboussinesq.diffops import (OPERATORS, biot_savart, curl_axisym, divergence_l2, dr_over_r,
                                   laplacian_axisym, modified_laplacian, stream_to_velocity,
                                   vr_over_r)
from axiboussinesq.errors import ParityMismatchError
from axiboussinesq.random_fields import random_bump_fields

GAUSS = lambda r, z: np.exp(-r**2 - z**2)  # noqa: E731


def field(g, fn, parity=EVEN):
    return ScalarFieldRZ.from_function(g, fn, parity)


@pytest.fixture(scope="module")
def g():
    return make_grid(32, 64, 2.0, -2.0, 2.0)


@pytest.mark.parametrize("op, expected", [
    (laplacian_axisym, 4.0),
    (modified_laplacian, 8.0),
    (dr_over_r, 2.0),
])
def test_polynomial_oracles(g, op, expected):
    np.testing.assert_allclose(op(field(g, lambda r, z: r**2)).values, expected, rtol=1e-10)
    one = field(g, lambda r, z: np.ones_like(r))
    if op is not dr_over_r:
        np.testing.assert_allclose(op(one).values, 0.0, atol=1e-10)


def test_dr_over_r_vanishes_on_z_only(g):
    np.testing.assert_allclose(dr_over_r(field(g, lambda r, z: np.sin(z) + 0 * r)).values, 0.0,
                               atol=1e-12)


def test_even_operators_reject_odd(g):
    odd = ScalarFieldRZ.zeros(g, ODD)
    for op in (laplacian_axisym, modified_laplacian, dr_over_r):
        with pytest.raises(ParityMismatchError):
            op(odd)
    with pytest.raises(ParityMismatchError):
        biot_savart(ScalarFieldRZ.zeros(g, EVEN))


def test_curl_polynomial(g):
    v = VelocityRZ(ScalarFieldRZ.zeros(g, ODD), field(g, lambda r, z: r**2))
    np.testing.assert_allclose(curl_axisym(v).values, -2 * g.r[:, None] + 0 * g.z, rtol=1e-10)
    assert not np.any(curl_axisym(VelocityRZ.zeros(g)).values)


def test_vr_over_r_exact(g):
    vr = field(g, lambda r, z: r * np.cos(z), ODD)
    v = VelocityRZ(vr, ScalarFieldRZ.zeros(g, EVEN))
    np.testing.assert_allclose(vr_over_r(v).values, np.cos(g.z)[None, :] + 0 * g.r[:, None],
                               rtol=1e-14)
    assert vr_over_r(v).parity == EVEN


@given(seed=st.integers(0, 2**16))
def test_decomposition_identity(seed):
    g = make_grid(16, 32, 3.0, -3.0, 3.0)
    f = random_bump_fields(seed, 1)[0].sample(g)
    lhs = modified_laplacian(f).values
    rhs = laplacian_axisym(f).values + 2 * dr_over_r(f).values
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * np.abs(lhs).max())


@given(seed=st.integers(0, 2**16), a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_operators_linear(seed, a, b):
    g = make_grid(16, 32, 3.0, -3.0, 3.0)
    f1, f2 = (x.sample(g) for x in random_bump_fields(seed, 2))
    for name, op in OPERATORS.items():
        if name == "stream_operator":
            f1o, f2o = f1.with_values(f1.values, ODD), f2.with_values(f2.values, ODD)
            lhs, rhs = op(f1o * a + f2o * b), op(f1o) * a + op(f2o) * b
        else:
            lhs, rhs = op(f1 * a + f2 * b), op(f1) * a + op(f2) * b
        scale = 1 + np.abs(op(f1).values).max() + np.abs(op(f2).values).max()
        np.testing.assert_allclose(lhs.values, rhs.values, atol=1e-11 * scale * (1 + abs(a) + abs(b)))


# Delta exp(-r^2-z^2) = (4r^2 - 4) e + (4z^2 - 2) e; the constant is -6, and the
# modified operator adds 2 d_r/r = -4.
@pytest.mark.parametrize("op, exact", [
    (laplacian_axisym, lambda r, z: (4 * r**2 + 4 * z**2 - 6) * GAUSS(r, z)),
    (modified_laplacian, lambda r, z: (4 * r**2 + 4 * z**2 - 10) * GAUSS(r, z)),
    (dr_over_r, lambda r, z: -2 * GAUSS(r, z)),
])
def test_gaussian_refinement_order(op, exact):
    errs, hs = [], []
    for n in (32, 64, 128):
        g = make_grid(n, 2 * n, 4.0, -4.0, 4.0)
        errs.append(lp_norm(op(field(g, GAUSS)) - field(g, exact)))
        hs.append(g.h)
    orders = np.log(np.array(errs[:-1]) / errs[1:]) / np.log(np.array(hs[:-1]) / hs[1:])
    assert orders.min() >= 1.9, orders


def test_curl_refinement_order():
    # e = exp(-r^2 - z^2); curl worked out by hand
    vr_f = lambda r, z: r * z * GAUSS(r, z)  # noqa: E731
    vz_f = lambda r, z: (1 - r**2) * GAUSS(r, z)  # noqa: E731
    om_f = lambda r, z: (r * (1 - 2 * z**2) + 2 * r + 2 * r * (1 - r**2)) * GAUSS(r, z)  # noqa: E731
    errs = []
    for n in (32, 64, 128):
        g = make_grid(n, 2 * n, 4.0, -4.0, 4.0)
        v = VelocityRZ(field(g, vr_f, ODD), field(g, vz_f))
        errs.append(lp_norm(curl_axisym(v) - field(g, om_f, ODD)))
    assert min(np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])) >= 1.9


def test_biot_savart_zero(g):
    v = biot_savart(ScalarFieldRZ.zeros(g, ODD))
    assert not np.any(v.vr.values) and not np.any(v.vz.values)


def test_biot_savart_divergence_free(g):
    om = field(g, lambda r, z: r * np.exp(-4 * (r - 0.8) ** 2 - 4 * z**2), ODD)
    v = biot_savart(om)
    assert divergence_l2(v) <= diffops.DIVERGENCE_TOL
    assert v.vr.parity == ODD and v.vz.parity == EVEN


def test_biot_savart_round_trip_order():
    om_f = lambda r, z: r * np.exp(-3 * r**2 - 3 * z**2)  # noqa: E731
    errs = []
    for n in (32, 64, 128):
        g = make_grid(n, 2 * n, 4.0, -4.0, 4.0)
        om = field(g, om_f, ODD)
        errs.append(lp_norm(curl_axisym(biot_savart(om)) - om) / lp_norm(om))
    assert errs[-1] < 1e-2
    assert min(np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])) >= 1.9


def test_stream_to_velocity_requires_odd(g):
    with pytest.raises(ParityMismatchError):
        stream_to_velocity(ScalarFieldRZ.zeros(g, EVEN))


def test_hls_ratio_refinement_stable():
    from axiboussinesq.monitor import hls_ratio
    ratios = []
    for n in (64, 128):
        g = make_grid(n, 2 * n, 4.0, -4.0, 4.0)
        zeta = field(g, lambda r, z: np.exp(-4 * (r - 1) ** 2 - 4 * z**2))
        ratios.append(hls_ratio(zeta))
    assert abs(ratios[1] / ratios[0] - 1) < 0.1
    assert np.isnan(hls_ratio(ScalarFieldRZ.zeros(g)))
