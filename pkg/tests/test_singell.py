import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from axiboussinesq import linsolve, singell
from axiboussinesq.cylgrid import EVEN, ODD, ScalarFieldRZ, h2_norm, lp_norm, make_grid
from axiboussinesq.errors import ParityMismatchError, SolverNonconvergenceError
from axiboussinesq.random_fields import random_bump_fields
from axiboussinesq.singell import (AxisRegularityWarning, ckn_check, convergence_study, op_L,
                                   op_L_regularized, op_Lz)


@pytest.fixture(scope="module")
def g():
    return make_grid(64, 128, 4.0, -4.0, 4.0)


def test_manufactured_pair_is_consistent():
    # d_r rho / r must equal (d_rr + 3 d_r / r + d_zz) exp(-r^2 - z^2); check by
    # finite differences of the closed forms at scattered points.
    rng = np.random.default_rng(0)
    r, z = rng.uniform(0.1, 2, 50), rng.uniform(-2, 2, 50)
    eps = 1e-5
    drho = (singell.manufactured_rho(r + eps, z) - singell.manufactured_rho(r - eps, z)) / (2 * eps)
    np.testing.assert_allclose(drho / r, singell.modified_laplacian_gaussian(r, z), rtol=1e-7, atol=1e-9)


def test_op_L_z_only_source_gives_zero(g):
    rho = ScalarFieldRZ.from_function(g, lambda r, z: np.exp(-z**2) + 0 * r)
    sol = op_L(rho)
    assert lp_norm(sol.f) <= 1e-12
    sol_eps = op_L_regularized(rho, 1e-2)
    assert lp_norm(sol_eps.f) <= 1e-12


def test_op_L_residual_contract(g):
    rho = ScalarFieldRZ.from_function(g, singell.manufactured_rho)
    sol = op_L(rho)
    assert sol.epsilon == 0.0
    assert sol.residual_l2 <= singell.ELLIPTIC_TOL * (1 + lp_norm(singell.dr_over_r(rho)))
    assert op_L(rho).f.values.tobytes() == sol.f.values.tobytes()   # deterministic


def test_op_L_rejects_odd(g):
    with pytest.raises(ParityMismatchError):
        op_L(ScalarFieldRZ.zeros(g, ODD))


def test_op_L_regularized_rejects_bad_epsilon(g):
    with pytest.raises(ValueError):
        op_L_regularized(ScalarFieldRZ.zeros(g), 0.0)


@pytest.mark.parametrize("operator", ["L", "Lz"])
def test_manufactured_convergence(operator):
    grids = [make_grid(n, 2 * n, 4.0, -4.0, 4.0) for n in (32, 64, 128)]
    rows = convergence_study(grids, 2.0, operator)
    assert [set(r) for r in rows] == [{"h", "l2_error", "order_estimate", "ratio_lp"}] * 3
    assert np.isnan(rows[0]["order_estimate"])
    assert min(r["order_estimate"] for r in rows[1:]) >= 1.9
    assert rows[-1]["l2_error"] < 1e-2


@given(seed=st.integers(0, 2**16), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_op_L_linear(seed, a, b):
    g = make_grid(16, 32, 4.0, -4.0, 4.0)
    r1, r2 = (f.sample(g) for f in random_bump_fields(seed, 2))
    lhs = op_L(r1 * a + r2 * b).f
    rhs = op_L(r1).f * a + op_L(r2).f * b
    assert lp_norm(lhs - rhs) <= 1e-9 * (1 + lp_norm(lhs))


def test_op_Lz_r_only_source_gives_zero(g):
    sigma = ScalarFieldRZ.from_function(g, lambda r, z: r * np.exp(-r**2) + 0 * z, ODD)
    assert lp_norm(op_Lz(sigma).f) <= 1e-12


def test_op_Lz_warns_on_irregular_even_input(g):
    sigma = ScalarFieldRZ.from_function(g, lambda r, z: np.exp(-r**2 - z**2))
    with pytest.warns(AxisRegularityWarning):
        op_Lz(sigma)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        op_Lz(sigma.with_values(sigma.values, ODD))


def test_op_Lz_bounded_under_refinement():
    fields = random_bump_fields(5, 4, parity=ODD)
    ratios = []
    for n in (32, 64):
        g = make_grid(n, 2 * n, 4.0, -4.0, 4.0)
        ratios.append(max(lp_norm(op_Lz(f.sample(g)).f) / lp_norm(f.sample(g)) for f in fields))
    assert abs(ratios[1] / ratios[0] - 1) < 0.2


def test_epsilon_sequence_converges(g):
    rho = ScalarFieldRZ.from_function(g, singell.manufactured_rho)
    f0 = op_L(rho).f
    gaps = [lp_norm(op_L_regularized(rho, e).f - f0) for e in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    for p in (2.0, 4.0, 6.0):
        r0 = singell.lp_ratio(rho, p)
        rs = [singell.lp_ratio(rho, p, e) for e in (1e-1, 1e-2, 1e-3, 1e-4)]
        assert max(rs) <= 1.2 * r0


def test_h2_control(g):
    for fld in random_bump_fields(12, 5):
        rho = fld.sample(g)
        assert h2_norm(op_L(rho).f) <= 4 * h2_norm(rho)


def test_ckn_oracles(g):
    assert ckn_check(ScalarFieldRZ.zeros(g), 2.0).degenerate
    assert np.isnan(ckn_check(ScalarFieldRZ.zeros(g), 2.0).ratio)
    res = ckn_check(ScalarFieldRZ.from_function(g, singell.gaussian), 2.0)
    assert res.ratio == pytest.approx(2.0, rel=0.02)
    with pytest.raises(ValueError):
        ckn_check(ScalarFieldRZ.zeros(g), 1.5)


@given(seed=st.integers(0, 2**16), p=st.sampled_from([2.0, 3.0, 4.0]))
def test_ckn_holds_on_random_fields(seed, p):
    g = make_grid(32, 64, 4.0, -4.0, 4.0)
    res = ckn_check(random_bump_fields(seed, 1)[0].sample(g), p)
    assert res.ratio >= 1 - 10 * g.h**2


def test_solver_reports_nonconvergence(g):
    solver = linsolve.solver_for(g, "modified_laplacian")
    with pytest.raises(SolverNonconvergenceError) as info:
        solver.solve(np.ones(g.shape), rtol=0.0)
    assert info.value.residual >= 0.0
