"""Diagonalizing unknowns of the density-vorticity coupling and residual
checks of the two operator identities satisfied by ``L``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .cylgrid import EVEN, ODD, ScalarFieldRZ, h2_norm, lp_norm
from .diffops import _require, d_r, d_z, laplacian_axisym, modified_laplacian, over_r, times_r
from .errors import GridMismatchError, NearOneBranchError
from .singell import (AxisRegularityWarning, manufactured_rho, modified_laplacian_gaussian,
                      op_L, op_Lz)

KAPPA_SWITCH = 0.5
GENERAL = "general"
NEAR_ONE = "near_one"


def select_branch(kappa: float, kappa_switch: float = KAPPA_SWITCH) -> str:
    """``near_one`` iff ``|kappa - 1| < kappa_switch``."""
    return NEAR_ONE if abs(kappa - 1.0) < kappa_switch else GENERAL


@dataclass(frozen=True)
class CoupledUnknowns:
    gamma: ScalarFieldRZ
    kappa: float
    branch: str


def _same_grid(a: ScalarFieldRZ, b: ScalarFieldRZ):
    if a.grid != b.grid:
        raise GridMismatchError("zeta and rho must share a grid")


def gamma_general(zeta: ScalarFieldRZ, rho: ScalarFieldRZ, kappa: float) -> ScalarFieldRZ:
    """``(1 - kappa) zeta - L rho``."""
    _same_grid(zeta, rho)
    return (1.0 - kappa) * zeta - op_L(rho).f


def gamma_near_one(zeta: ScalarFieldRZ, rho: ScalarFieldRZ) -> ScalarFieldRZ:
    """``zeta - rho / 2``."""
    _same_grid(zeta, rho)
    return zeta - 0.5 * rho


def coupled_unknowns(zeta, rho, kappa, kappa_switch=KAPPA_SWITCH) -> CoupledUnknowns:
    branch = select_branch(kappa, kappa_switch)
    if branch == NEAR_ONE:
        return CoupledUnknowns(gamma_near_one(zeta, rho), kappa, branch)
    return CoupledUnknowns(gamma_general(zeta, rho, kappa), kappa, branch)


def recover_zeta(gamma: ScalarFieldRZ, rho: ScalarFieldRZ, kappa: float,
                 kappa_switch: float = KAPPA_SWITCH) -> ScalarFieldRZ:
    """Invert :func:`gamma_general`: ``zeta = (gamma + L rho) / (1 - kappa)``."""
    if abs(kappa - 1.0) < kappa_switch:
        raise NearOneBranchError(
            f"|kappa - 1| = {abs(kappa - 1):.3g} < {kappa_switch}; use gamma_near_one")
    _same_grid(gamma, rho)
    return (gamma + op_L(rho).f) / (1.0 - kappa)


def _relative(a: ScalarFieldRZ, b: ScalarFieldRZ, relative: bool) -> float:
    diff = lp_norm(a - b, 2)
    if not relative:
        return diff
    scale = max(lp_norm(a, 2), lp_norm(b, 2))
    return 0.0 if scale == 0.0 else diff / scale


def commutator_residual_lemma_LD(rho: ScalarFieldRZ, relative: bool = True) -> float:
    """L^2 mismatch between ``L(Delta rho)`` and ``(Delta + (2/r) d_r) L rho``.

    Centred stencils make the two discrete compositions agree to rounding in
    the interior; what is left comes from the outer closure, where the
    extrapolated ghost of the applied operator meets the Dirichlet row of the
    solve.  On rapidly decaying data that part shrinks like ``h^2``.
    """
    _require(rho, EVEN, "commutator_residual_lemma_LD")
    lhs = op_L(laplacian_axisym(rho)).f
    rhs = modified_laplacian(op_L(rho).f)
    return _relative(lhs, rhs, relative)


def lemma_LD_consistency(grid, relative: bool = True) -> float:
    """``L_h`` applied to ``Delta rho`` against the exact ``(Delta + (2/r) d_r) L rho``.

    Uses the manufactured pair in which ``L rho = exp(-r^2 - z^2)``, so the
    right-hand side of the identity is known in closed form.  Converges at
    second order, unlike the discrete-vs-discrete residual whose interior part
    is already at rounding level.
    """
    rho = ScalarFieldRZ.from_function(grid, manufactured_rho)
    exact = ScalarFieldRZ.from_function(grid, modified_laplacian_gaussian)
    return _relative(op_L(laplacian_axisym(rho)).f, exact, relative)


def leme1_sides(f: ScalarFieldRZ) -> tuple[ScalarFieldRZ, ScalarFieldRZ]:
    """Both sides of ``L d_r f = f/r - L(f/r) - d_z (Delta + (2/r) d_r)^{-1}(d_z f / r)``."""
    _require(f, ODD, "identity_residual_leme1")
    lhs = op_L(d_r(f)).f
    f_over_r = over_r(f)
    rhs = f_over_r - op_L(f_over_r).f - d_z(op_Lz(f).f)
    return lhs, rhs


def identity_residual_leme1(f: ScalarFieldRZ, relative: bool = True) -> float:
    """Residual of the identity for ``L d_r f``.

    ``f`` should be odd in r (``f = r g``) so that ``f / r`` is regular.  An
    even field is replaced by ``r f``; if it does not vanish on the axis an
    :class:`AxisRegularityWarning` says so.  The identity needs ``d_z`` to commute with the inverse of the modified
    Laplacian, which a Dirichlet cut in z breaks at O(1); run it on a grid
    with ``z_bc="periodic"`` to see the discretization error alone.
    """
    if f.parity == EVEN:
        scale = float(np.abs(f.values).max())
        if scale > 0 and float(np.abs(f.values[0]).max()) > 1e-8 * scale:
            warnings.warn("identity_residual_leme1: even input does not vanish on the axis; "
                          "checking r f instead", AxisRegularityWarning, stacklevel=2)
        f = times_r(f)
    if not np.any(f.values):
        return 0.0
    lhs, rhs = leme1_sides(f)
    return _relative(lhs, rhs, relative)


def lemma_tol(rho: ScalarFieldRZ, factor: float = 50.0) -> float:
    """``factor * h^2 * ||rho||_{H^2}`` (absolute residual allowance)."""
    return factor * rho.grid.h**2 * h2_norm(rho)


def identity_study(grids, rho_func, f_func, grids_leme1=None) -> list[dict]:
    """Residual ladder for both identities.

    Rows carry ``h, residual_lemLD, residual_leme1, order_estimate`` where the
    order is the smaller of the two per-identity estimates against the
    previous row.
    """
    grids_leme1 = grids if grids_leme1 is None else grids_leme1
    rows, prev = [], None
    for g, g1 in zip(grids, grids_leme1):
        a = commutator_residual_lemma_LD(ScalarFieldRZ.from_function(g, rho_func))
        b = identity_residual_leme1(ScalarFieldRZ.from_function(g1, f_func, ODD))
        order = np.nan
        if prev is not None:
            hr = np.log(prev[0] / g.h)
            order = min(np.log(prev[1] / a) / hr, np.log(prev[2] / b) / hr)
        rows.append({"h": g.h, "residual_lemLD": a, "residual_leme1": b,
                     "order_estimate": order})
        prev = (g.h, a, b)
    return rows
