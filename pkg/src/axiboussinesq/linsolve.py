"""Sparse assembly of the cylindrical stencils and cached linear solves.

Matrices act on fields flattened in row-major ``(nr, nz)`` order, so radial
operators are ``A_r (x) I_z`` and axial ones ``I_r (x) A_z``.  The axis row
uses the parity ghost, the outer radial row the homogeneous Dirichlet ghost,
and the axial rows either Dirichlet or periodic wrap-around.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cylgrid import EVEN, Z_PERIODIC, GridSpec
from .errors import SolverNonconvergenceError

# Above this many unknowns the direct factorization is replaced by
# ILU-preconditioned GMRES.
DIRECT_SOLVE_LIMIT = 600_000
SOLVER_RTOL = 1e-10


def _ghosted_tridiag(n, lower, diag, upper, low_ghost, up_ghost, periodic=False):
    """Tridiagonal stencil where the ghost at -1 is ``low_ghost * f_0``.

    ``up_ghost`` likewise sets ``f_n = up_ghost * f_{n-1}``.  Coefficients may
    be scalars or length-``n`` arrays.
    """
    lower = np.broadcast_to(np.asarray(lower, float), (n,)).copy()
    diag = np.broadcast_to(np.asarray(diag, float), (n,)).copy()
    upper = np.broadcast_to(np.asarray(upper, float), (n,)).copy()
    if periodic:
        A = sp.diags([lower[1:], diag, upper[:-1]], [-1, 0, 1], shape=(n, n), format="lil")
        A[0, n - 1] += lower[0]
        A[n - 1, 0] += upper[n - 1]
        return A.tocsr()
    diag[0] += low_ghost * lower[0]
    diag[n - 1] += up_ghost * upper[n - 1]
    return sp.diags([lower[1:], diag, upper[:-1]], [-1, 0, 1], shape=(n, n), format="csr")


def _axis_sign(parity):
    return 1.0 if parity == EVEN else -1.0


@lru_cache(maxsize=64)
def radial_d1(grid: GridSpec, parity: str = EVEN, outer_sign: float = -1.0):
    n, h = grid.nr, grid.dr
    return _ghosted_tridiag(n, -0.5 / h, 0.0, 0.5 / h, _axis_sign(parity), outer_sign)


@lru_cache(maxsize=64)
def radial_d2(grid: GridSpec, parity: str = EVEN, outer_sign: float = -1.0):
    n, h = grid.nr, grid.dr
    return _ghosted_tridiag(n, 1 / h**2, -2 / h**2, 1 / h**2, _axis_sign(parity), outer_sign)


@lru_cache(maxsize=64)
def axial_d1(grid: GridSpec):
    n, h = grid.nz, grid.dz
    return _ghosted_tridiag(n, -0.5 / h, 0.0, 0.5 / h, -1.0, -1.0,
                            periodic=grid.z_bc == Z_PERIODIC)


@lru_cache(maxsize=64)
def axial_d2(grid: GridSpec):
    n, h = grid.nz, grid.dz
    return _ghosted_tridiag(n, 1 / h**2, -2 / h**2, 1 / h**2, -1.0, -1.0,
                            periodic=grid.z_bc == Z_PERIODIC)


def _kron_r(grid, A):
    return sp.kron(A, sp.identity(grid.nz, format="csr"), format="csr")


def _kron_z(grid, A):
    return sp.kron(sp.identity(grid.nr, format="csr"), A, format="csr")


@lru_cache(maxsize=64)
def matrix(grid: GridSpec, tag: str):
    """Assembled operator ``tag`` with solver boundary conditions.

    Tags: ``laplacian`` (d_rr + d_r/r + d_zz on even fields),
    ``modified_laplacian`` (d_rr + 3 d_r/r + d_zz), ``dr_over_r``,
    ``d_z_even``, ``d_z_odd``, ``stream_operator`` (d_rr + d_r/r - 1/r^2 + d_zz
    on odd fields) and ``vector_laplacian`` (the same operator, used for
    omega_theta).
    """
    inv_r = sp.diags(1.0 / grid.r)
    if tag == "laplacian":
        Ar = radial_d2(grid, EVEN) + inv_r @ radial_d1(grid, EVEN)
        return (_kron_r(grid, Ar) + _kron_z(grid, axial_d2(grid))).tocsr()
    if tag == "modified_laplacian":
        Ar = radial_d2(grid, EVEN) + 3 * (inv_r @ radial_d1(grid, EVEN))
        return (_kron_r(grid, Ar) + _kron_z(grid, axial_d2(grid))).tocsr()
    if tag == "dr_over_r":
        return _kron_r(grid, inv_r @ radial_d1(grid, EVEN))
    if tag in ("d_z_even", "d_z_odd"):
        return _kron_z(grid, axial_d1(grid))
    if tag in ("stream_operator", "vector_laplacian"):
        Ar = (radial_d2(grid, "odd") + inv_r @ radial_d1(grid, "odd")
              - sp.diags(1.0 / grid.r**2))
        return (_kron_r(grid, Ar) + _kron_z(grid, axial_d2(grid))).tocsr()
    raise KeyError(f"unknown operator tag {tag!r}")


@lru_cache(maxsize=32)
def _regularized_matrix(grid: GridSpec, epsilon: float):
    r = grid.r
    coef = sp.diags(2 * r / (r**2 + epsilon))
    Ar = radial_d2(grid, EVEN) + sp.diags(1.0 / r) @ radial_d1(grid, EVEN) + coef @ radial_d1(grid, EVEN)
    return (_kron_r(grid, Ar) + _kron_z(grid, axial_d2(grid))).tocsr()


def regularized_matrix(grid: GridSpec, epsilon: float):
    """``Delta + 2 r d_r / (r^2 + eps)`` with the same boundary rules."""
    return _regularized_matrix(grid, float(epsilon))


class _Solver:
    """Factorized (or preconditioned iterative) solver for a fixed matrix."""

    def __init__(self, A):
        self.A = A.tocsc()
        self.n = A.shape[0]
        if self.n <= DIRECT_SOLVE_LIMIT:
            self._lu = spla.splu(self.A, permc_spec="COLAMD")
            self._ilu = None
        else:
            self._lu = None
            self._ilu = spla.spilu(self.A, drop_tol=1e-5, fill_factor=20)

    def solve(self, b, rtol=SOLVER_RTOL):
        b = np.ascontiguousarray(b, dtype=float).ravel()
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0:
            return np.zeros_like(b), 0.0
        if self._lu is not None:
            x = self._lu.solve(b)
        else:
            M = spla.LinearOperator(self.A.shape, self._ilu.solve)
            x, info = spla.gmres(self.A, b, M=M, rtol=rtol * 0.1, restart=200, maxiter=50)
            if info != 0:
                res = np.linalg.norm(self.A @ x - b) / bnorm
                raise SolverNonconvergenceError("GMRES did not converge", res)
        res = float(np.linalg.norm(self.A @ x - b) / bnorm)
        if not res <= rtol:
            # one step of iterative refinement before giving up
            if self._lu is not None:
                x = x + self._lu.solve(b - self.A @ x)
                res = float(np.linalg.norm(self.A @ x - b) / bnorm)
            if not res <= rtol:
                raise SolverNonconvergenceError("linear solve missed tolerance", res)
        return x, res


@lru_cache(maxsize=32)
def solver_for(grid: GridSpec, tag: str, shift: float = 0.0, scale: float = 1.0,
               epsilon: float = 0.0) -> _Solver:
    """Cached solver for ``shift * I + scale * A_tag``.

    ``tag == "regularized"`` uses the epsilon-regularized operator.
    """
    A = regularized_matrix(grid, epsilon) if tag == "regularized" else matrix(grid, tag)
    if shift != 0.0 or scale != 1.0:
        A = shift * sp.identity(A.shape[0], format="csr") + scale * A
    return _Solver(A)


def clear_caches():
    for f in (radial_d1, radial_d2, axial_d1, axial_d2, matrix, _regularized_matrix, solver_for):
        f.cache_clear()
