"""Axisymmetric differential operators, curl and Biot-Savart inversion.

Stencils are centred and second order.  Each operator accepts ``outer``:
``"extrapolate"`` (default) closes the far boundaries by cubic extrapolation,
so polynomial test fields are differentiated exactly up to the edge;
``"dirichlet"`` reproduces the homogeneous-Dirichlet rows used by the
solvers, which is what identity checks against solver output need.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import linsolve
from .cylgrid import (EVEN, ODD, Z_PERIODIC, GridSpec, ScalarFieldRZ, VelocityRZ,
                      integrate, pad)
from .errors import ParityMismatchError

DIVERGENCE_TOL = 1e-10


def _require(f: ScalarFieldRZ, parity: str, name: str):
    if f.parity != parity:
        raise ParityMismatchError(f"{name} expects an {parity} field, got {f.parity}")


def _stencil_parts(f: ScalarFieldRZ, outer: str):
    g = f.grid
    a = pad(f.values, g, f.parity, outer)
    c = a[1:-1, 1:-1]
    d2r = (a[2:, 1:-1] - 2 * c + a[:-2, 1:-1]) / g.dr**2
    d1r = (a[2:, 1:-1] - a[:-2, 1:-1]) / (2 * g.dr)
    d2z = (a[1:-1, 2:] - 2 * c + a[1:-1, :-2]) / g.dz**2
    return d2r, d1r, d2z


def laplacian_axisym(f: ScalarFieldRZ, outer: str = "extrapolate") -> ScalarFieldRZ:
    """``d_rr f + d_r f / r + d_zz f`` for an even field.

    >>> from axiboussinesq.cylgrid import make_grid
    >>> g = make_grid(8, 8, 1.0, -1.0, 1.0)
    >>> f = ScalarFieldRZ.from_function(g, lambda r, z: r**2)
    >>> bool(np.allclose(laplacian_axisym(f).values, 4.0))
    True
    """
    _require(f, EVEN, "laplacian_axisym")
    d2r, d1r, d2z = _stencil_parts(f, outer)
    return f.with_values(d2r + d1r / f.grid.r[:, None] + d2z)


def modified_laplacian(f: ScalarFieldRZ, outer: str = "extrapolate") -> ScalarFieldRZ:
    """``(Delta + (2/r) d_r) f = d_rr f + 3 d_r f / r + d_zz f`` for an even field."""
    _require(f, EVEN, "modified_laplacian")
    d2r, d1r, d2z = _stencil_parts(f, outer)
    return f.with_values(d2r + 3 * d1r / f.grid.r[:, None] + d2z)


def dr_over_r(f: ScalarFieldRZ, outer: str = "extrapolate") -> ScalarFieldRZ:
    """``(d_r f) / r``; regular at the axis since ``d_r f`` is odd."""
    _require(f, EVEN, "dr_over_r")
    g = f.grid
    a = pad(f.values, g, EVEN, outer)
    d1r = (a[2:, 1:-1] - a[:-2, 1:-1]) / (2 * g.dr)
    return f.with_values(d1r / g.r[:, None])


def d_r(f: ScalarFieldRZ, outer: str = "extrapolate") -> ScalarFieldRZ:
    """Centred radial derivative; flips the parity."""
    g = f.grid
    a = pad(f.values, g, f.parity, outer)
    out = ODD if f.parity == EVEN else EVEN
    return ScalarFieldRZ(g, (a[2:, 1:-1] - a[:-2, 1:-1]) / (2 * g.dr), out)


def d_z(f: ScalarFieldRZ, outer: str = "extrapolate") -> ScalarFieldRZ:
    """Centred axial derivative; keeps the parity."""
    g = f.grid
    a = pad(f.values, g, f.parity, outer)
    return f.with_values((a[1:-1, 2:] - a[1:-1, :-2]) / (2 * g.dz))


def over_r(f: ScalarFieldRZ) -> ScalarFieldRZ:
    """Pointwise ``f / r`` of an odd field (even result)."""
    _require(f, ODD, "over_r")
    return ScalarFieldRZ(f.grid, f.values / f.grid.r[:, None], EVEN)


def times_r(f: ScalarFieldRZ) -> ScalarFieldRZ:
    """Pointwise ``r f`` of an even field (odd result)."""
    _require(f, EVEN, "times_r")
    return ScalarFieldRZ(f.grid, f.values * f.grid.r[:, None], ODD)


def curl_axisym(v: VelocityRZ, outer: str = "extrapolate") -> ScalarFieldRZ:
    """``omega_theta = d_z v^r - d_r v^z`` (odd)."""
    return ScalarFieldRZ(v.grid, d_z(v.vr, outer).values - d_r(v.vz, outer).values, ODD)


def vr_over_r(v: VelocityRZ) -> ScalarFieldRZ:
    """Stretching factor ``v^r / r`` (even)."""
    return over_r(v.vr)


def stream_to_velocity(psi: ScalarFieldRZ) -> VelocityRZ:
    """``v^r = -d_z psi`` and ``v^z = (1/r) d_r (r psi)`` with Dirichlet ghosts."""
    _require(psi, ODD, "stream_to_velocity")
    g = psi.grid
    a = pad(psi.values, g, ODD, "dirichlet")
    r_ext = np.concatenate([[-g.r[0]], g.r, [g.rmax + 0.5 * g.dr]])[:, None]
    ra = r_ext * a
    vr = -(a[1:-1, 2:] - a[1:-1, :-2]) / (2 * g.dz)
    vz = (ra[2:, 1:-1] - ra[:-2, 1:-1]) / (2 * g.dr) / g.r[:, None]
    return VelocityRZ(ScalarFieldRZ(g, vr, ODD), ScalarFieldRZ(g, vz, EVEN), psi)


def biot_savart(omega_theta: ScalarFieldRZ) -> VelocityRZ:
    """Recover the swirl-free velocity from its vorticity.

    Solves ``-(d_rr + d_r/r - 1/r^2 + d_zz) psi = omega_theta`` with psi = 0 on
    the outer boundary and odd parity at the axis, then differentiates.
    """
    _require(omega_theta, ODD, "biot_savart")
    g = omega_theta.grid
    if not np.any(omega_theta.values):
        return VelocityRZ.zeros(g)
    solver = linsolve.solver_for(g, "stream_operator", 0.0, -1.0)
    x, _ = solver.solve(omega_theta.values)
    psi = ScalarFieldRZ(g, x.reshape(g.shape), ODD)
    return stream_to_velocity(psi)


def divergence(v: VelocityRZ, outer: str = "extrapolate") -> np.ndarray:
    """Centred ``(1/r) d_r (r v^r) + d_z v^z``."""
    g = v.grid
    a = pad(v.vr.values, g, ODD, outer)
    r_ext = np.concatenate([[-g.r[0]], g.r, [g.rmax + 0.5 * g.dr]])[:, None]
    ra = r_ext * a
    div_r = (ra[2:, 1:-1] - ra[:-2, 1:-1]) / (2 * g.dr) / g.r[:, None]
    return div_r + d_z(v.vz, outer).values


def interior_mask(grid: GridSpec) -> np.ndarray:
    """Cells not adjacent to the outer radial or (non-periodic) axial boundary."""
    m = np.ones(grid.shape, dtype=bool)
    m[-1, :] = False
    if grid.z_bc != Z_PERIODIC:
        m[:, 0] = False
        m[:, -1] = False
    return m


def divergence_l2(v: VelocityRZ) -> float:
    """Cylindrical L^2 norm of the discrete divergence over interior cells.

    Ghost values of ``v`` at the truncation boundary are not those implied by
    its stream function, so the first layer of cells there is excluded.
    """
    div = divergence(v) * interior_mask(v.grid)
    return float(np.sqrt(integrate(v.grid, div**2)))


@dataclass(frozen=True)
class LinearOperatorRZ:
    """Matrix-free linear operator over scalar fields with a symbolic tag."""

    tag: str
    apply: Callable[[ScalarFieldRZ], ScalarFieldRZ]

    def __call__(self, f: ScalarFieldRZ) -> ScalarFieldRZ:
        return self.apply(f)


OPERATORS = {
    "laplacian": LinearOperatorRZ("laplacian", laplacian_axisym),
    "modified_laplacian": LinearOperatorRZ("modified_laplacian", modified_laplacian),
    "d_r": LinearOperatorRZ("d_r", d_r),
    "d_z": LinearOperatorRZ("d_z", d_z),
    "stream_operator": LinearOperatorRZ(
        "stream_operator",
        lambda f: ScalarFieldRZ(f.grid, (linsolve.matrix(f.grid, "stream_operator")
                                         @ f.values.ravel()).reshape(f.grid.shape), ODD)),
}
