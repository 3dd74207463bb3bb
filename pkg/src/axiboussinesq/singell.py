"""The singular elliptic operators ``L = (Delta + (2/r) d_r)^{-1} (d_r / r)`` and
``L_z = (Delta + (2/r) d_r)^{-1} (d_z / r)``.

The cell-centred grid keeps every ``1/r`` coefficient finite, so the singular
form is discretized directly; the epsilon-regularized operator
``Delta + 2 r d_r / (r^2 + eps)`` is available for cross-validation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import linsolve
from .cylgrid import EVEN, ODD, ScalarFieldRZ, integrate, lp_norm
from .diffops import _require, d_r, d_z, dr_over_r
from .errors import SolverNonconvergenceError

ELLIPTIC_TOL = 1e-10
DEGENERATE_LHS = 1e-14


class AxisRegularityWarning(UserWarning):
    """Input does not vanish on the axis although a quotient by r is taken."""


@dataclass(frozen=True)
class EllipticSolution:
    f: ScalarFieldRZ
    residual_l2: float
    epsilon: float = 0.0


def _solve(grid, A_tag, rhs: np.ndarray, epsilon: float = 0.0) -> EllipticSolution:
    if not np.any(rhs):
        return EllipticSolution(ScalarFieldRZ.zeros(grid, EVEN), 0.0, epsilon)
    solver = linsolve.solver_for(grid, A_tag, epsilon=epsilon)
    x, _ = solver.solve(rhs)
    resid = (solver.A @ x - rhs.ravel()).reshape(grid.shape)
    res_l2 = float(np.sqrt(integrate(grid, resid**2)))
    rhs_l2 = float(np.sqrt(integrate(grid, rhs**2)))
    if res_l2 > ELLIPTIC_TOL * (1 + rhs_l2):
        raise SolverNonconvergenceError("elliptic solve above tolerance",
                                        res_l2 / max(rhs_l2, 1e-300))
    return EllipticSolution(ScalarFieldRZ(grid, x.reshape(grid.shape), EVEN), res_l2, epsilon)


def op_L(rho: ScalarFieldRZ) -> EllipticSolution:
    """Solve ``(d_rr + 3 d_r / r + d_zz) f = d_r rho / r``.

    ``f`` vanishes on the outer boundary and is even across the axis.
    """
    _require(rho, EVEN, "op_L")
    rhs = dr_over_r(rho).values
    return _solve(rho.grid, "modified_laplacian", rhs)


def op_L_regularized(rho: ScalarFieldRZ, epsilon: float) -> EllipticSolution:
    """Solve ``(Delta + 2 r d_r / (r^2 + eps)) f = r d_r rho / (r^2 + eps)``."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    _require(rho, EVEN, "op_L_regularized")
    r = rho.grid.r[:, None]
    rhs = r * d_r(rho).values / (r**2 + epsilon)
    return _solve(rho.grid, "regularized", rhs, float(epsilon))


def op_Lz(sigma: ScalarFieldRZ, axis_tol: float = 1e-8) -> EllipticSolution:
    """Solve ``(Delta + (2/r) d_r) f = (d_z sigma) / r``.

    ``sigma`` should be odd in r so that ``sigma / r`` is regular; an even
    input that does not vanish near the axis triggers
    :class:`AxisRegularityWarning`.
    """
    g = sigma.grid
    if sigma.parity == EVEN:
        scale = max(float(np.abs(sigma.values).max()), 1e-300)
        if float(np.abs(sigma.values[0]).max()) > axis_tol * scale:
            warnings.warn("op_Lz: sigma does not vanish near the axis",
                          AxisRegularityWarning, stacklevel=2)
    rhs = d_z(sigma).values / g.r[:, None]
    return _solve(g, "modified_laplacian", rhs)


@dataclass(frozen=True)
class CKNResult:
    lhs: float
    rhs: float
    ratio: float
    degenerate: bool


def ckn_check(f: ScalarFieldRZ, p: float) -> CKNResult:
    """Both sides of ``||f||_p^p <= (p^2/4) int |d_r f|^2 |f|^{p-2} r^2 dx``.

    ``ratio = rhs / lhs``; it is NaN and ``degenerate`` is set when the
    left-hand side is below 1e-14.
    """
    if not 2 <= p < np.inf:
        raise ValueError(f"p must lie in [2, inf), got {p}")
    g = f.grid
    a = np.abs(f.values)
    lhs = integrate(g, a**p)
    fr = d_r(f).values
    r2 = g.r[:, None] ** 2
    rhs = (p**2 / 4.0) * integrate(g, fr**2 * a ** (p - 2) * r2)
    if lhs < DEGENERATE_LHS:
        return CKNResult(lhs, rhs, float("nan"), True)
    return CKNResult(lhs, rhs, rhs / lhs, False)


def lp_ratio(rho: ScalarFieldRZ, p: float, epsilon: float = 0.0) -> float:
    """``||L rho||_p / ||rho||_p`` (regularized when ``epsilon > 0``)."""
    sol = op_L_regularized(rho, epsilon) if epsilon > 0 else op_L(rho)
    return lp_norm(sol.f, p) / lp_norm(rho, p)


# ---------------------------------------------------------------------------
# manufactured pairs

def gaussian(r, z):
    return np.exp(-r**2 - z**2)


def manufactured_rho(r, z):
    """Density whose image under L is exactly ``exp(-r^2 - z^2)``."""
    return (3 - 2 * r**2 - 2 * z**2) * np.exp(-r**2 - z**2)


def modified_laplacian_gaussian(r, z):
    return (4 * r**2 + 4 * z**2 - 10) * np.exp(-r**2 - z**2)


def convergence_study(grids, p: float = 2.0, operator: str = "L") -> list[dict]:
    """Manufactured-solution error ladder for ``op_L`` or ``op_Lz``.

    Returns rows with keys ``h, l2_error, order_estimate, ratio_lp``; the
    error is relative to the exact Gaussian and the order compares each row
    with the previous one.
    """
    rows = []
    prev = None
    for g in grids:
        exact = ScalarFieldRZ.from_function(g, gaussian)
        if operator == "L":
            src = ScalarFieldRZ.from_function(g, manufactured_rho)
            sol = op_L(src)
        elif operator == "Lz":
            src = lz_source(g)
            sol = op_Lz(src)
        else:
            raise ValueError(f"unknown operator {operator!r}")
        err = lp_norm(sol.f - exact, 2) / lp_norm(exact, 2)
        order = np.nan if prev is None else np.log(prev[1] / err) / np.log(prev[0] / g.h)
        rows.append({"h": g.h, "l2_error": err, "order_estimate": order,
                     "ratio_lp": lp_norm(sol.f, p) / lp_norm(src, p)})
        prev = (g.h, err)
    return rows


def lz_source(grid, fine: int = 8) -> ScalarFieldRZ:
    """``sigma(r, z) = int_{zmin}^z r M f0 dz'`` for ``f0 = exp(-r^2 - z^2)``.

    ``M f0`` is known in closed form; the z-integral is a cumulative
    composite Simpson rule on a ``fine``-times refined axial grid, sampled at
    the cell centres.  The result is odd in r.
    """
    from scipy.integrate import cumulative_simpson

    nzf = grid.nz * fine
    zf = np.linspace(grid.zmin, grid.zmax, 2 * nzf + 1)
    r = grid.r[:, None]
    vals = r * modified_laplacian_gaussian(r, zf[None, :])
    cum = cumulative_simpson(vals, x=zf, axis=1, initial=0.0)
    # spacing dz / (2 fine): cell centre j sits on fine index (2j + 1) fine
    idx = (2 * np.arange(grid.nz) + 1) * fine
    return ScalarFieldRZ(grid, cum[:, idx], ODD)
