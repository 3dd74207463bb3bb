"""Littlewood-Paley blocks and Besov norms for axisymmetric fields.

The frequency side is built from the discrete operators themselves: in r the
eigenvectors of the cell-centred ``d_rr + d_r/r`` (``- 1/r^2`` for odd
fields) with a zero-flux outer ghost, made orthonormal in the ``r dr``
weight; in z the orthonormal DCT-II.  Both transforms are exactly
invertible, so ``sum_q Delta_q f = f`` holds to rounding for any field and
Plancherel is exact.  Each radial mode is labelled with the wavenumber of
the continuous Neumann mode it approximates (zeros of ``J_1`` for even
fields, of ``J_1'`` for odd ones), which keeps the block indices in
physical units.

Nothing here is used while stepping; it is diagnostics only.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.fft import dct, idct
from scipy.special import jn_zeros, jnp_zeros

from .cylgrid import EVEN, ODD, GridSpec, ScalarFieldRZ, VelocityRZ, lp_norm, pad
from .errors import GridTooCoarseError, ParityMismatchError

EMPTY_BLOCK = 1e-14
# transition interval of the cut-off theta
_T0, _T1 = 0.75, 4.0 / 3.0


def _smooth_step(s):
    """C-infinity step from 1 (s <= 0) down to 0 (s >= 1)."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return b / (a + b)


def theta(x):
    """Radial cut-off: 1 on ``[0, 3/4]``, 0 from ``4/3`` on, smooth and monotone."""
    x = np.abs(np.asarray(x, dtype=float))
    return _smooth_step((x - _T0) / (_T1 - _T0))


def chi(xi):
    return theta(xi)


def phi(xi):
    """Annulus profile ``theta(xi/2) - theta(xi)``, supported in ``[3/4, 8/3]``."""
    return theta(np.asarray(xi) / 2.0) - theta(xi)


@dataclass(frozen=True)
class DyadicPartition:
    """Dyadic cut-offs on a grid.

    Blocks are ``q = -1 .. qmax``.  The top block also carries everything
    above its annulus (multiplier ``1 - theta(2^-qmax xi)``), so the
    multipliers sum to one at every discrete frequency.
    """

    grid: GridSpec
    qmax: int

    @property
    def qs(self) -> range:
        return range(-1, self.qmax + 1)

    chi = staticmethod(chi)
    phi = staticmethod(phi)

    def multiplier(self, q: int, xi):
        xi = np.asarray(xi, dtype=float)
        if q == -1:
            return chi(xi)
        if q == self.qmax:
            return 1.0 - theta(xi * 2.0**-q)
        return phi(xi * 2.0**-q)

    def multipliers(self, xi) -> np.ndarray:
        return np.stack([self.multiplier(q, xi) for q in self.qs])

    def profile_sums(self, xi, nterms: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """``chi + sum phi(2^-q xi)`` and ``chi^2 + sum phi(2^-q xi)^2`` over
        ``q = 0 .. nterms-1`` (untruncated profiles, no tail block)."""
        xi = np.asarray(xi, dtype=float)
        if nterms is None:
            top = float(np.max(xi, initial=1.0))
            nterms = int(np.ceil(np.log2(max(top, 1.0)))) + 2
        terms = [chi(xi)] + [phi(xi * 2.0**-q) for q in range(nterms)]
        return sum(terms), sum(t**2 for t in terms)


def qmax_for(grid: GridSpec) -> int:
    return int(np.floor(np.log2(np.pi / grid.h))) - 1


def build_partition(grid: GridSpec) -> DyadicPartition:
    q = qmax_for(grid)
    if q < 1:
        raise GridTooCoarseError(f"grid spacing {grid.h:.3g} resolves no dyadic block (qmax={q})")
    return DyadicPartition(grid, q)


# ---------------------------------------------------------------------------
# spectral basis

@dataclass(frozen=True)
class _Basis:
    U: np.ndarray          # orthonormal eigenvectors of the symmetrized radial operator
    sqrt_w: np.ndarray     # sqrt(r_i)
    k_r: np.ndarray
    k_z: np.ndarray
    xi: np.ndarray = field(repr=False)  # |xi| on the (nr, nz) coefficient array


@lru_cache(maxsize=32)
def _basis(grid: GridSpec, parity: str) -> _Basis:
    n, dr = grid.nr, grid.dr
    r = grid.r
    rp = r + 0.5 * dr          # face radii, the one at the axis is zero
    rm = r - 0.5 * dr
    # r * A is symmetric: fluxes through faces, zero flux through the outer face
    diag = -(rp + rm) / dr**2
    diag[-1] += rp[-1] / dr**2
    if parity == ODD:
        diag = diag - 1.0 / r
    off = rp[:-1] / dr**2
    sw = np.sqrt(r)
    S = (np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)) / np.outer(sw, sw)
    lam, U = np.linalg.eigh(S)
    order = np.argsort(-lam)
    U = U[:, order]
    if parity == EVEN:
        k_r = np.concatenate([[0.0], jn_zeros(1, n - 1)]) / grid.rmax
    else:
        k_r = jnp_zeros(1, n) / grid.rmax
    k_z = np.pi * np.arange(grid.nz) / (grid.zmax - grid.zmin)
    xi = np.hypot(k_r[:, None], k_z[None, :])
    return _Basis(U, sw, k_r, k_z, xi)


def forward(values: np.ndarray, grid: GridSpec, parity: str = EVEN) -> np.ndarray:
    b = _basis(grid, parity)
    c = b.U.T @ (b.sqrt_w[:, None] * values)
    return dct(c, type=2, norm="ortho", axis=1)


def inverse(coef: np.ndarray, grid: GridSpec, parity: str = EVEN) -> np.ndarray:
    b = _basis(grid, parity)
    c = idct(coef, type=2, norm="ortho", axis=1)
    return (b.U @ c) / b.sqrt_w[:, None]


def frequencies(grid: GridSpec, parity: str = EVEN) -> np.ndarray:
    """``|xi|`` attached to each coefficient of :func:`forward`."""
    return _basis(grid, parity).xi


def mode(grid: GridSpec, k: int, n: int, parity: str = EVEN) -> ScalarFieldRZ:
    """Single basis function (radial index ``k``, axial index ``n``)."""
    c = np.zeros(grid.shape)
    c[k, n] = 1.0
    return ScalarFieldRZ(grid, inverse(c, grid, parity), parity)


# ---------------------------------------------------------------------------
# blocks

@dataclass(frozen=True)
class DyadicDecomposition:
    partition: DyadicPartition
    blocks: list

    def block(self, q: int) -> ScalarFieldRZ:
        return self.blocks[q + 1]

    def partial_sum(self, n: int) -> ScalarFieldRZ:
        """``S_n = sum_{j <= n-1} Delta_j``."""
        keep = self.blocks[: max(0, min(n + 1, len(self.blocks)))]
        if not keep:
            return self.blocks[0] * 0.0
        out = keep[0]
        for b in keep[1:]:
            out = out + b
        return out

    def reconstruct(self) -> ScalarFieldRZ:
        return self.partial_sum(len(self.blocks))


def _check_partition(f: ScalarFieldRZ, part: DyadicPartition | None) -> DyadicPartition:
    if part is None:
        return build_partition(f.grid)
    if part.grid != f.grid:
        raise ValueError("partition was built for another grid")
    return part


def decompose(f: ScalarFieldRZ, part: DyadicPartition | None = None) -> DyadicDecomposition:
    """Split ``f`` into its dyadic blocks ``Delta_q f``, ``q = -1 .. qmax``.

    Odd fields (radial velocity components) are transformed with the
    first-order radial basis, which is how the block operator acts on
    ``v^r e_r``.
    """
    part = _check_partition(f, part)
    coef = forward(f.values, f.grid, f.parity)
    xi = frequencies(f.grid, f.parity)
    blocks = [ScalarFieldRZ(f.grid, inverse(coef * part.multiplier(q, xi), f.grid, f.parity),
                            f.parity)
              for q in part.qs]
    return DyadicDecomposition(part, blocks)


def mollify(f: ScalarFieldRZ, n: int, part: DyadicPartition | None = None) -> ScalarFieldRZ:
    """Low-frequency cut ``S_n f``; ``n = qmax + 1`` returns ``f`` itself."""
    part = _check_partition(f, part)
    if n > part.qmax + 1:
        raise ValueError(f"n={n} exceeds qmax+1={part.qmax + 1}")
    coef = forward(f.values, f.grid, f.parity)
    xi = frequencies(f.grid, f.parity)
    if n == part.qmax + 1:
        mult = np.ones_like(xi)
    else:
        mult = theta(xi * 2.0 ** -(n - 1)) if n >= 0 else np.zeros_like(xi)
    return f.with_values(inverse(coef * mult, f.grid, f.parity))


def _seq_norm(a: np.ndarray, r: float) -> float:
    if np.isinf(r):
        return float(np.max(a, initial=0.0))
    return float(np.sum(a**r) ** (1.0 / r))


def besov_norm(f: ScalarFieldRZ, s: float, p: float, r: float,
               part: DyadicPartition | None = None) -> float:
    """``|| (2^{qs} ||Delta_q f||_{L^p})_q ||_{l^r}`` over the resolved blocks."""
    if not (p >= 1 and r >= 1):
        raise ValueError("p and r must lie in [1, inf]")
    dec = decompose(f, part)
    w = np.array([2.0 ** (q * s) * lp_norm(b, p) for q, b in zip(dec.partition.qs, dec.blocks)])
    return _seq_norm(w, r)


def besov_norm_velocity(v: VelocityRZ, s: float, p: float, r: float,
                        part: DyadicPartition | None = None) -> float:
    """Besov norm of a swirl-free field using the pointwise Euclidean magnitude
    of each block ``(Delta_q v^r, Delta_q v^z)``."""
    dr_ = decompose(v.vr, part)
    dz_ = decompose(v.vz, dr_.partition)
    w = np.array([2.0 ** (q * s) * lp_norm(np.hypot(a.values, b.values), p, v.grid)
                  for q, a, b in zip(dr_.partition.qs, dr_.blocks, dz_.blocks)])
    return _seq_norm(w, r)


# ---------------------------------------------------------------------------
# Bernstein

BERNSTEIN_LOW = 1.0 / 8.0
BERNSTEIN_HIGH = 8.0


class BernsteinResult(NamedTuple):
    lhs: float
    rhs_low: float
    rhs_high: float
    norm_b: float = float("nan")
    bound_b: float = float("nan")
    empty: bool = False

    @property
    def ratio(self) -> float:
        """``||grad Delta_q f|| / (2^q ||Delta_q f||)``."""
        return self.lhs * BERNSTEIN_LOW / self.rhs_low if self.rhs_low > 0 else float("nan")

    @property
    def holds(self) -> bool:
        return (not self.empty) and self.rhs_low <= self.lhs <= self.rhs_high


def gradient_magnitude(f: ScalarFieldRZ) -> np.ndarray:
    """Pointwise ``|grad f|`` of the 3-D field; odd fields are treated as the
    radial component of a vector, which adds the hoop term ``f / r``."""
    g = f.grid
    a = pad(f.values, g, f.parity, "neumann")
    fr = (a[2:, 1:-1] - a[:-2, 1:-1]) / (2 * g.dr)
    fz = (a[1:-1, 2:] - a[1:-1, :-2]) / (2 * g.dz)
    sq = fr**2 + fz**2
    if f.parity == ODD:
        sq = sq + (f.values / g.r[:, None]) ** 2
    return np.sqrt(sq)


def bernstein_check(f: ScalarFieldRZ, q: int, a: float = 2.0, b: float = np.inf,
                    part: DyadicPartition | None = None,
                    c_low: float = BERNSTEIN_LOW, c_high: float = BERNSTEIN_HIGH) -> BernsteinResult:
    """Measure ``||grad Delta_q f||_{L^a}`` against ``[c_low, c_high] 2^q ||Delta_q f||_{L^a}``.

    Also returns ``||Delta_q f||_{L^b}`` and the bound
    ``2^{3q(1/a - 1/b)} ||Delta_q f||_{L^a}`` (no constant).  Blocks whose
    norm is below 1e-14 come back with ``empty=True``.
    """
    part = _check_partition(f, part)
    if not 0 <= q <= part.qmax:
        raise ValueError(f"q={q} outside resolved range 0..{part.qmax}")
    if not 1 <= a <= b:
        raise ValueError("need 1 <= a <= b")
    blk = decompose(f, part).block(q)
    na = lp_norm(blk, a)
    if na < EMPTY_BLOCK:
        return BernsteinResult(0.0, 0.0, 0.0, 0.0, 0.0, True)
    lhs = lp_norm(gradient_magnitude(blk), a, f.grid)
    scale = 2.0**q * na
    nb = lp_norm(blk, b)
    return BernsteinResult(lhs, c_low * scale, c_high * scale, nb,
                           2.0 ** (3 * q * (1 / a - 1 / b)) * na, False)


def single_block_field(grid: GridSpec, q: int, parity: str = EVEN) -> ScalarFieldRZ:
    """Basis mode whose frequency sits where ``phi(2^-q .)`` equals one."""
    xi = frequencies(grid, parity)
    target = 1.4 * 2.0**q
    k, n = np.unravel_index(np.argmin(np.abs(xi - target)), xi.shape)
    return mode(grid, int(k), int(n), parity)


def bernstein_constants(f: ScalarFieldRZ, part: DyadicPartition | None = None,
                        a: float = 2.0) -> tuple[float, float]:
    """Smallest and largest ``||grad Delta_q f|| / (2^q ||Delta_q f||)`` over
    the non-empty blocks ``q = 1 .. qmax-1``."""
    part = _check_partition(f, part)
    dec = decompose(f, part)
    ratios = []
    for q in range(1, part.qmax):
        blk = dec.block(q)
        na = lp_norm(blk, a)
        if na < EMPTY_BLOCK * max(lp_norm(f, a), 1.0):
            continue
        ratios.append(lp_norm(gradient_magnitude(blk), a, f.grid) / (2.0**q * na))
    if not ratios:
        return float("nan"), float("nan")
    return float(min(ratios)), float(max(ratios))


# ---------------------------------------------------------------------------
# report

BESOV_COLUMNS = ("t", "besov_b31_0_rho", "besov_bp1_1p3p_v", "bernstein_cmin", "bernstein_cmax")


def besov_row(t: float, rho: ScalarFieldRZ, v: VelocityRZ, p: float = 3.0) -> dict:
    if rho.parity != EVEN:
        raise ParityMismatchError("density must be even")
    part = build_partition(rho.grid)
    cmin, cmax = bernstein_constants(rho, part)
    return {
        "t": t,
        "besov_b31_0_rho": besov_norm(rho, 0.0, 3.0, 1.0, part),
        "besov_bp1_1p3p_v": besov_norm_velocity(v, 1.0 + 3.0 / p, p, 1.0, part),
        "bernstein_cmin": cmin,
        "bernstein_cmax": cmax,
    }


def write_besov_report(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BESOV_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({k: repr(float(row[k])) for k in BESOV_COLUMNS})
