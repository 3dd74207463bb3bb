"""Cell-centred meridian-plane grid, axisymmetric scalar fields and norms.

Radial nodes sit at ``r_i = (i + 1/2) dr`` so no sample lies on the symmetry
axis; axis regularity is encoded through mirror ("even") or anti-mirror
("odd") ghost values.  All integrals use the midpoint rule with the
cylindrical volume element ``2 pi r dr dz``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import GridMismatchError, InvalidDimensionError, ParityMismatchError

EVEN = "even"
ODD = "odd"
PARITIES = (EVEN, ODD)

Z_DIRICHLET = "dirichlet"
Z_PERIODIC = "periodic"


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell-centred grid on ``[0, rmax] x [zmin, zmax]``.

    ``z_bc`` selects how the axial direction is closed: homogeneous Dirichlet
    (default) or periodic.  The outer radial boundary is always Dirichlet for
    the solvers.
    """

    nr: int
    nz: int
    rmax: float
    zmin: float
    zmax: float
    z_bc: str = Z_DIRICHLET

    @property
    def dr(self) -> float:
        return self.rmax / self.nr

    @property
    def dz(self) -> float:
        return (self.zmax - self.zmin) / self.nz

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nr, self.nz)

    @property
    def h(self) -> float:
        return max(self.dr, self.dz)

    @property
    def r(self) -> np.ndarray:
        return (np.arange(self.nr) + 0.5) * self.dr

    @property
    def z(self) -> np.ndarray:
        return self.zmin + (np.arange(self.nz) + 0.5) * self.dz

    @property
    def r_faces(self) -> np.ndarray:
        return np.arange(self.nr + 1) * self.dr

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(R, Z)`` arrays of shape ``(nr, nz)``."""
        return np.meshgrid(self.r, self.z, indexing="ij")

    @property
    def cell_volume(self) -> np.ndarray:
        """Midpoint weights ``2 pi r_i dr dz`` broadcastable to ``(nr, nz)``."""
        return (2.0 * np.pi * self.dr * self.dz) * self.r[:, None]

    @property
    def volume(self) -> float:
        return np.pi * self.rmax**2 * (self.zmax - self.zmin)

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.nr * factor, self.nz * factor, self.rmax,
                        self.zmin, self.zmax, self.z_bc)

    def enlarged(self, factor: float = 2.0) -> "GridSpec":
        """Same spacing on a domain scaled by ``factor`` about z = 0."""
        nr = int(round(self.nr * factor))
        nz = int(round(self.nz * factor))
        return GridSpec(nr, nz, self.rmax * factor, self.zmin * factor,
                        self.zmax * factor, self.z_bc)


def make_grid(nr: int, nz: int, rmax: float, zmin: float, zmax: float,
              z_bc: str = Z_DIRICHLET) -> GridSpec:
    """Validate the dimensions and build a :class:`GridSpec`.

    Examples
    --------
    >>> make_grid(4, 4, 1.0, -1.0, 1.0).r
    array([0.125, 0.375, 0.625, 0.875])
    """
    if int(nr) != nr or int(nz) != nz:
        raise InvalidDimensionError("nr and nz must be integers")
    if nr < 4 or nz < 4:
        raise InvalidDimensionError(f"need nr, nz >= 4, got nr={nr}, nz={nz}")
    if not rmax > 0:
        raise InvalidDimensionError(f"rmax must be positive, got {rmax}")
    if not zmin < zmax:
        raise InvalidDimensionError(f"need zmin < zmax, got [{zmin}, {zmax}]")
    if z_bc not in (Z_DIRICHLET, Z_PERIODIC):
        raise InvalidDimensionError(f"unknown z_bc {z_bc!r}")
    return GridSpec(int(nr), int(nz), float(rmax), float(zmin), float(zmax), z_bc)


@dataclass(frozen=True, eq=False)
class ScalarFieldRZ:
    """Samples of an axisymmetric scalar on a grid, tagged with axis parity."""

    grid: GridSpec
    values: np.ndarray
    parity: str = EVEN

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise InvalidDimensionError(
                f"values shape {values.shape} does not match grid {self.grid.shape}")
        if self.parity not in PARITIES:
            raise ParityMismatchError(f"unknown parity {self.parity!r}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: GridSpec, func, parity: str = EVEN) -> "ScalarFieldRZ":
        R, Z = grid.mesh()
        return cls(grid, np.broadcast_to(func(R, Z), grid.shape).astype(float), parity)

    @classmethod
    def zeros(cls, grid: GridSpec, parity: str = EVEN) -> "ScalarFieldRZ":
        return cls(grid, np.zeros(grid.shape), parity)

    def with_values(self, values, parity: str | None = None) -> "ScalarFieldRZ":
        return ScalarFieldRZ(self.grid, values, self.parity if parity is None else parity)

    def _check_compatible(self, other: "ScalarFieldRZ"):
        if other.grid != self.grid:
            raise GridMismatchError("fields live on different grids")
        if other.parity != self.parity:
            raise ParityMismatchError("cannot combine fields of different parity")

    def __add__(self, other):
        if isinstance(other, ScalarFieldRZ):
            self._check_compatible(other)
            return self.with_values(self.values + other.values)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, ScalarFieldRZ):
            self._check_compatible(other)
            return self.with_values(self.values - other.values)
        return NotImplemented

    def __mul__(self, c):
        if np.isscalar(c):
            return self.with_values(c * self.values)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def __truediv__(self, c):
        if np.isscalar(c):
            return self.with_values(self.values / c)
        return NotImplemented


@dataclass(frozen=True, eq=False)
class VelocityRZ:
    """Swirl-free velocity ``v^r e_r + v^z e_z``.

    ``psi`` optionally carries the stream function the field was built from;
    the transport schemes use it to form exactly divergence-free face fluxes.
    """

    vr: ScalarFieldRZ
    vz: ScalarFieldRZ
    psi: ScalarFieldRZ | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.vr.parity != ODD or self.vz.parity != EVEN:
            raise ParityMismatchError("velocity needs odd v^r and even v^z")
        if self.vr.grid != self.vz.grid:
            raise GridMismatchError("velocity components on different grids")

    @property
    def grid(self) -> GridSpec:
        return self.vr.grid

    @classmethod
    def zeros(cls, grid: GridSpec) -> "VelocityRZ":
        return cls(ScalarFieldRZ.zeros(grid, ODD), ScalarFieldRZ.zeros(grid, EVEN),
                   ScalarFieldRZ.zeros(grid, ODD))

    def max_speed(self) -> float:
        return float(np.sqrt(np.max(self.vr.values**2 + self.vz.values**2)))


# ---------------------------------------------------------------------------
# ghost cells

def pad(values: np.ndarray, grid: GridSpec, parity: str, outer: str = "extrapolate",
        width: int = 1) -> np.ndarray:
    """Extend an ``(nr, nz)`` array by ``width`` ghost layers on every side.

    The axis side always mirrors according to ``parity``.  ``outer`` selects
    the far boundaries: ``"dirichlet"`` (odd reflection about the boundary
    face) or ``"extrapolate"`` (cubic extrapolation, exact for cubics).  A
    periodic grid wraps in z regardless of ``outer``.
    """
    if parity not in PARITIES:
        raise ParityMismatchError(f"unknown parity {parity!r}")
    sign = 1.0 if parity == EVEN else -1.0
    a = np.asarray(values, dtype=float)

    lower = sign * a[width - 1::-1, :]
    upper = _outer_ghosts(a, outer, width, axis=0)
    a = np.concatenate([lower, a, upper], axis=0)

    if grid.z_bc == Z_PERIODIC:
        a = np.concatenate([a[:, -width:], a, a[:, :width]], axis=1)
    else:
        low_z = _outer_ghosts(a[:, ::-1], outer, width, axis=1)[:, ::-1]
        up_z = _outer_ghosts(a, outer, width, axis=1)
        a = np.concatenate([low_z, a, up_z], axis=1)
    return a


def _outer_ghosts(a: np.ndarray, outer: str, width: int, axis: int) -> np.ndarray:
    a = np.moveaxis(a, axis, 0)
    if outer == "dirichlet":
        g = -a[-1:-width - 1:-1]
    elif outer == "extrapolate":
        rows = list(a[-4:])
        for _ in range(width):
            f4, f3, f2, f1 = rows[-4], rows[-3], rows[-2], rows[-1]
            rows.append(4 * f1 - 6 * f2 + 4 * f3 - f4)
        g = np.array(rows[4:])
    elif outer == "neumann":
        g = a[-1:-width - 1:-1]
    else:
        raise ValueError(f"unknown outer boundary rule {outer!r}")
    return np.moveaxis(g, 0, axis)


def ghost_value(field: ScalarFieldRZ) -> np.ndarray:
    """Axis ghost row (the value at r = -dr/2) implied by the field's parity."""
    sign = 1.0 if field.parity == EVEN else -1.0
    return sign * field.values[0]


# ---------------------------------------------------------------------------
# quadrature and norms

def integrate(grid: GridSpec, integrand: np.ndarray) -> float:
    """Midpoint rule for ``int f dx`` over the 3-D cylinder."""
    # np.sum on a contiguous array is a fixed pairwise tree, so it is
    # reproducible run to run.
    weighted = np.ascontiguousarray(integrand * grid.cell_volume).ravel()
    return float(np.sum(weighted))


def lp_norm(f: ScalarFieldRZ | np.ndarray, p: float = 2.0, grid: GridSpec | None = None) -> float:
    """Cylindrically weighted ``L^p`` norm; ``p = inf`` is the grid maximum."""
    if isinstance(f, ScalarFieldRZ):
        grid, values = f.grid, f.values
    else:
        values = np.asarray(f, dtype=float)
    if not (p >= 1):
        raise ValueError(f"p must lie in [1, inf], got {p}")
    a = np.abs(values)
    m = float(a.max()) if a.size else 0.0
    if m == 0.0:
        return 0.0
    if np.isinf(p):
        return m
    return m * integrate(grid, (a / m) ** p) ** (1.0 / p)


def inner(f: ScalarFieldRZ, g: ScalarFieldRZ) -> float:
    return integrate(f.grid, f.values * g.values)


def gradient(f: ScalarFieldRZ, outer: str = "extrapolate") -> tuple[np.ndarray, np.ndarray]:
    """Centred ``(d_r f, d_z f)`` using parity ghosts at the axis."""
    g = f.grid
    a = pad(f.values, g, f.parity, outer)
    fr = (a[2:, 1:-1] - a[:-2, 1:-1]) / (2 * g.dr)
    fz = (a[1:-1, 2:] - a[1:-1, :-2]) / (2 * g.dz)
    return fr, fz


def hessian_parts(f: ScalarFieldRZ, outer: str = "extrapolate"):
    """Return ``(f_rr, f_r / r, f_rz, f_zz)`` with centred second differences."""
    g = f.grid
    a = pad(f.values, g, f.parity, outer)
    c = a[1:-1, 1:-1]
    frr = (a[2:, 1:-1] - 2 * c + a[:-2, 1:-1]) / g.dr**2
    fzz = (a[1:-1, 2:] - 2 * c + a[1:-1, :-2]) / g.dz**2
    fr = (a[2:, 1:-1] - a[:-2, 1:-1]) / (2 * g.dr)
    frz = (a[2:, 2:] - a[2:, :-2] - a[:-2, 2:] + a[:-2, :-2]) / (4 * g.dr * g.dz)
    return frr, fr / g.r[:, None], frz, fzz


def h_norms(f: ScalarFieldRZ, outer: str = "extrapolate") -> tuple[float, float, float]:
    """``(||f||_2, |f|_{H^1}, |f|_{H^2})`` of the axisymmetric function in R^3.

    The second-order seminorm is the Frobenius norm of the Cartesian Hessian,
    which for ``f(r, z)`` reads ``f_rr^2 + (f_r/r)^2 + 2 f_rz^2 + f_zz^2``.
    """
    g = f.grid
    fr, fz = gradient(f, outer)
    h1 = np.sqrt(integrate(g, fr**2 + fz**2))
    frr, fr_r, frz, fzz = hessian_parts(f, outer)
    h2 = np.sqrt(integrate(g, frr**2 + fr_r**2 + 2 * frz**2 + fzz**2))
    return lp_norm(f, 2), float(h1), float(h2)


def h2_norm(f: ScalarFieldRZ, outer: str = "extrapolate") -> float:
    l2, h1, h2 = h_norms(f, outer)
    return float(np.sqrt(l2**2 + h1**2 + h2**2))


def velocity_l2(v: VelocityRZ) -> float:
    return float(np.sqrt(integrate(v.grid, v.vr.values**2 + v.vz.values**2)))


def velocity_gradient_sq(v: VelocityRZ, outer: str = "extrapolate") -> np.ndarray:
    """Pointwise ``|grad v|^2`` including the hoop term ``(v^r / r)^2``."""
    vr_r, vr_z = gradient(v.vr, outer)
    vz_r, vz_z = gradient(v.vz, outer)
    hoop = v.vr.values / v.grid.r[:, None]
    return vr_r**2 + vr_z**2 + hoop**2 + vz_r**2 + vz_z**2


def velocity_h1_seminorm(v: VelocityRZ, outer: str = "extrapolate") -> float:
    return float(np.sqrt(integrate(v.grid, velocity_gradient_sq(v, outer))))


def velocity_grad_linf(v: VelocityRZ, outer: str = "extrapolate") -> float:
    """Max over the grid of the Frobenius norm of the velocity gradient."""
    return float(np.sqrt(np.max(velocity_gradient_sq(v, outer))))
