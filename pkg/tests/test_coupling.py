import numpy as np
import pytest
from hypothesis import given, strategies as st

from axiboussinesq import coupling, singell
from axiboussinesq.coupling import (GENERAL, NEAR_ONE, commutator_residual_lemma_LD,
                                    coupled_unknowns, gamma_general, gamma_near_one,
                                    identity_residual_leme1, lemma_tol, recover_zeta,
                                    select_branch)
from axiboussinesq.cylgrid import EVEN, ODD, ScalarFieldRZ, lp_norm, make_grid
from axiboussinesq.errors import GridMismatchError, NearOneBranchError
from axiboussinesq.random_fields import random_bump_fields
from axiboussinesq.singell import AxisRegularityWarning

GAUSS = singell.gaussian


@pytest.fixture(scope="module")
def g():
    return make_grid(64, 128, 4.0, -4.0, 4.0)


@pytest.fixture(scope="module")
def gp():
    return make_grid(64, 128, 4.0, -4.0, 4.0, "periodic")


@pytest.mark.parametrize("kappa, branch", [
    (0.0, GENERAL), (0.49, GENERAL), (0.51, NEAR_ONE), (1.0, NEAR_ONE),
    (1.49, NEAR_ONE), (1.51, GENERAL), (2.0, GENERAL),
])
def test_branch_rule(kappa, branch):
    assert select_branch(kappa) == branch
    assert select_branch(kappa) == select_branch(kappa)


def test_gamma_oracles(g):
    zeta = random_bump_fields(1, 1)[0].sample(g)
    rho = ScalarFieldRZ.from_function(g, singell.manufactured_rho)
    zero = ScalarFieldRZ.zeros(g)
    np.testing.assert_allclose(gamma_general(zeta, zero, 0.3).values, 0.7 * zeta.values)
    np.testing.assert_allclose(gamma_general(zeta, rho, 1.0).values, -singell.op_L(rho).f.values)
    err = gamma_general(zeta, rho, 0.0) - (zeta - ScalarFieldRZ.from_function(g, GAUSS))
    assert lp_norm(err) < 1e-2
    np.testing.assert_array_equal(gamma_near_one(zeta, zero).values, zeta.values)
    assert not np.any(gamma_near_one(rho * 0.5, rho).values)
    np.testing.assert_allclose(gamma_near_one(zeta, rho).values, zeta.values - rho.values / 2)


def test_shared_grid_required(g):
    other = make_grid(32, 64, 4.0, -4.0, 4.0)
    with pytest.raises(GridMismatchError):
        gamma_near_one(ScalarFieldRZ.zeros(g), ScalarFieldRZ.zeros(other))


def test_coupled_unknowns_picks_branch(g):
    zeta, rho = (f.sample(g) for f in random_bump_fields(2, 2))
    assert coupled_unknowns(zeta, rho, 0.9).branch == NEAR_ONE
    cu = coupled_unknowns(zeta, rho, 0.2)
    assert cu.branch == GENERAL and cu.kappa == 0.2


@pytest.mark.parametrize("kappa", [0.0, 0.5 - 1e-9, 2.0])
def test_recover_zeta_round_trip(g, kappa):
    zeta, rho = (f.sample(g) for f in random_bump_fields(3, 2))
    back = recover_zeta(gamma_general(zeta, rho, kappa), rho, kappa)
    assert lp_norm(back - zeta) <= 1e-9 * lp_norm(zeta)


def test_recover_zeta_guard(g):
    with pytest.raises(NearOneBranchError):
        recover_zeta(ScalarFieldRZ.zeros(g), ScalarFieldRZ.zeros(g), 0.999)


@given(seed=st.integers(0, 2**16), a=st.floats(-2, 2), kappa=st.floats(0, 0.45))
def test_gamma_affine(seed, a, kappa):
    g = make_grid(16, 32, 4.0, -4.0, 4.0)
    z1, z2, rho = (f.sample(g) for f in random_bump_fields(seed, 3))
    lhs = gamma_general(z1 + z2 * a, rho, kappa)
    rhs = gamma_general(z1, rho, kappa) + z2 * ((1 - kappa) * a)
    assert lp_norm(lhs - rhs) <= 1e-10 * (1 + lp_norm(lhs))


def test_lemma_LD_zero_for_z_only(g):
    rho = ScalarFieldRZ.from_function(g, lambda r, z: np.exp(-z**2) + 0 * r)
    # both sides vanish, so only the absolute residual is meaningful
    assert commutator_residual_lemma_LD(rho, relative=False) <= 1e-12


def test_lemma_LD_order():
    res, hs = [], []
    for n in (32, 64, 128):
        g = make_grid(n, 2 * n, 4.0, -4.0, 4.0)
        res.append(commutator_residual_lemma_LD(ScalarFieldRZ.from_function(g, GAUSS)))
        hs.append(g.h)
    orders = np.log(np.array(res[:-1]) / res[1:]) / np.log(np.array(hs[:-1]) / hs[1:])
    assert orders.min() >= 1.9


def test_lemma_LD_consistency_second_order():
    errs = [coupling.lemma_LD_consistency(make_grid(n, 2 * n, 4.0, -4.0, 4.0)) for n in (32, 64, 128)]
    assert min(np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])) >= 1.9


def test_lemma_LD_within_tolerance_on_random_fields(g):
    for fld in random_bump_fields(21, 5):
        rho = fld.sample(g)
        assert commutator_residual_lemma_LD(rho, relative=False) <= lemma_tol(rho)


def test_leme1_zero(gp):
    assert identity_residual_leme1(ScalarFieldRZ.zeros(gp, ODD)) == 0.0


def test_leme1_order():
    res = []
    for n in (32, 64, 128):
        g = make_grid(n, 2 * n, 4.0, -4.0, 4.0, "periodic")
        res.append(identity_residual_leme1(
            ScalarFieldRZ.from_function(g, lambda r, z: r * GAUSS(r, z), ODD)))
    assert min(np.log2(res[0] / res[1]), np.log2(res[1] / res[2])) >= 1.9


def test_leme1_second_field_within_tolerance(gp):
    f = ScalarFieldRZ.from_function(gp, lambda r, z: r * z * GAUSS(r, z), ODD)
    assert identity_residual_leme1(f, relative=False) <= lemma_tol(f)


def test_leme1_even_input(gp):
    f = ScalarFieldRZ.from_function(gp, GAUSS)
    with pytest.warns(AxisRegularityWarning):
        res = identity_residual_leme1(f)
    odd = ScalarFieldRZ.from_function(gp, lambda r, z: r * GAUSS(r, z), ODD)
    assert res == identity_residual_leme1(odd)


def test_identity_study_rows():
    grids = [make_grid(n, 2 * n, 4.0, -4.0, 4.0) for n in (32, 64)]
    periodic = [make_grid(n, 2 * n, 4.0, -4.0, 4.0, "periodic") for n in (32, 64)]
    rows = coupling.identity_study(grids, GAUSS, lambda r, z: r * GAUSS(r, z), periodic)
    assert list(rows[0]) == ["h", "residual_lemLD", "residual_leme1", "order_estimate"]
    assert np.isnan(rows[0]["order_estimate"]) and rows[1]["order_estimate"] > 1.9
