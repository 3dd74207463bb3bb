"""Time stepping for the axisymmetric Boussinesq system in ``(zeta, rho)``.

Each step advects explicitly, then diffuses implicitly::

    rho*  = rho  - dt v.grad rho             (finite volume, frozen v)
    zeta* = zeta - dt v.grad zeta
    (I - dt kappa Delta) rho_new = rho*
    (I - dt (Delta + (2/r) d_r)) zeta_new = zeta* - dt d_r rho_new / r
    v_new = BiotSavart(r zeta_new)

Advective fluxes come from the Stokes stream function ``Psi = r psi`` sampled
at cell corners, so the discrete flux field is divergence free to rounding
and closed at the truncation boundary.  ``upwind2`` (minmod MUSCL, SSP-RK2)
does not create new extrema; ``centered_rk2`` is the non-dissipative
alternative.

The buoyancy source uses ``rho_new`` and the same matrix rows as the two
diffusion solves.  With ``kappa = 1`` and ``zeta = rho / 2`` this keeps
``zeta - rho / 2`` at zero to solver precision, a cheap but sharp check of
the whole step.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from . import linsolve
from .coupling import NEAR_ONE, gamma_general, gamma_near_one, select_branch
from .cylgrid import (EVEN, ODD, Z_PERIODIC, GridSpec, ScalarFieldRZ, VelocityRZ, gradient,
                      integrate, lp_norm, pad, velocity_grad_linf, velocity_gradient_sq,
                      velocity_h1_seminorm, velocity_l2)
from .diffops import biot_savart, stream_to_velocity, times_r
from .errors import BlowUpError, ParityMismatchError
from .io import TIMESERIES_COLUMNS, write_checkpoint

log = logging.getLogger(__name__)

OVERFLOW_GUARD = 1e8
SCHEMES = ("upwind2", "centered_rk2")
FORMULATIONS = ("zeta", "omega")
_MAX_HALVINGS = 30


@dataclass(frozen=True)
class SimState:
    t: float
    kappa: float
    rho: ScalarFieldRZ
    zeta: ScalarFieldRZ
    v: VelocityRZ

    @property
    def grid(self) -> GridSpec:
        return self.rho.grid

    @property
    def omega(self) -> ScalarFieldRZ:
        return times_r(self.zeta)


def make_state(rho: ScalarFieldRZ, zeta: ScalarFieldRZ, kappa: float, t: float = 0.0) -> SimState:
    """State with the velocity recovered from ``zeta``."""
    if rho.parity != EVEN or zeta.parity != EVEN:
        raise ParityMismatchError("rho and zeta must be even")
    if kappa < 0:
        raise ValueError(f"kappa must be non-negative, got {kappa}")
    return SimState(float(t), float(kappa), rho, zeta, biot_savart(times_r(zeta)))


@dataclass(frozen=True)
class StepConfig:
    """``dt`` is the requested step; it is halved as often as needed to keep
    both ``dt max|v| / min(dr, dz)`` and the finite-volume outflow number
    ``dt max_cell(outflow / volume)`` below ``cfl_max``.  With
    ``adaptive_dt=False`` the requested step is taken as is, stable or not
    (used to exercise the blow-up guard)."""

    dt: float = 0.01
    cfl_max: float = 0.4
    advection_scheme: str = "upwind2"
    diffusion: str = "implicit_backward_euler"
    formulation: str = "zeta"
    overflow_guard: float = OVERFLOW_GUARD
    check_parity: bool = False
    adaptive_dt: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0 < self.cfl_max <= 1:
            raise ValueError(f"cfl_max must lie in (0, 1], got {self.cfl_max}")
        if self.advection_scheme not in SCHEMES:
            raise ValueError(f"unknown advection scheme {self.advection_scheme!r}")
        if self.diffusion != "implicit_backward_euler":
            raise ValueError(f"unknown diffusion scheme {self.diffusion!r}")
        if self.formulation not in FORMULATIONS:
            raise ValueError(f"unknown formulation {self.formulation!r}")


# ---------------------------------------------------------------------------
# finite-volume advection

@dataclass(frozen=True)
class Fluxes:
    """Volume fluxes (per radian) through radial faces ``gr`` (nr+1, nz) and
    axial faces ``gz`` (nr, nz+1); ``vol`` is ``r dr dz`` per cell."""

    gr: np.ndarray
    gz: np.ndarray
    vol: np.ndarray

    def outflow_rate(self) -> np.ndarray:
        out = (np.maximum(self.gr[1:], 0) + np.maximum(-self.gr[:-1], 0)
               + np.maximum(self.gz[:, 1:], 0) + np.maximum(-self.gz[:, :-1], 0))
        return out / self.vol

    def net_outflow(self) -> np.ndarray:
        return (self.gr[1:] - self.gr[:-1] + self.gz[:, 1:] - self.gz[:, :-1]) / self.vol


def fluxes_from_stream(psi: ScalarFieldRZ) -> Fluxes:
    g = psi.grid
    a = pad(psi.values, g, ODD, "dirichlet")
    corner = 0.25 * (a[:-1, :-1] + a[1:, :-1] + a[:-1, 1:] + a[1:, 1:])
    Psi = (g.dr * np.arange(g.nr + 1))[:, None] * corner
    # a closed box: the boundary is a single streamline
    Psi[-1, :] = 0.0
    if g.z_bc != Z_PERIODIC:
        Psi[:, 0] = 0.0
        Psi[:, -1] = 0.0
    gr = -(Psi[:, 1:] - Psi[:, :-1])
    gz = Psi[1:, :] - Psi[:-1, :]
    vol = (g.r * g.dr * g.dz)[:, None] * np.ones((1, g.nz))
    return Fluxes(gr, gz, vol)


def fluxes_for(v: VelocityRZ) -> Fluxes:
    psi = v.psi
    if psi is None:
        from .diffops import curl_axisym
        psi = biot_savart(curl_axisym(v)).psi
    return fluxes_from_stream(psi)


def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _face_values(q: np.ndarray, grid: GridSpec, parity: str, fl: Fluxes, scheme: str):
    a = pad(q, grid, parity, "neumann", width=2)
    if scheme == "centered_rk2":
        fr = 0.5 * (a[1:-2, 2:-2] + a[2:-1, 2:-2])
        fz = 0.5 * (a[2:-2, 1:-2] + a[2:-2, 2:-1])
        return fr, fz
    # slopes on cells -1 .. n in each direction
    sr = _minmod(a[1:-1] - a[:-2], a[2:] - a[1:-1])[:, 2:-2]
    sz = _minmod(a[:, 1:-1] - a[:, :-2], a[:, 2:] - a[:, 1:-1])[2:-2, :]
    c_r = a[1:-1, 2:-2]
    left = c_r[:-1] + 0.5 * sr[:-1]
    right = c_r[1:] - 0.5 * sr[1:]
    fr = np.where(fl.gr > 0, left, right)
    c_z = a[2:-2, 1:-1]
    low = c_z[:, :-1] + 0.5 * sz[:, :-1]
    high = c_z[:, 1:] - 0.5 * sz[:, 1:]
    fz = np.where(fl.gz > 0, low, high)
    return fr, fz


def advection_rhs(q: np.ndarray, grid: GridSpec, parity: str, fl: Fluxes,
                  scheme: str = "upwind2") -> np.ndarray:
    """``-div(v q)`` in flux form, which equals ``-v.grad q`` for solenoidal v."""
    fr, fz = _face_values(q, grid, parity, fl, scheme)
    Fr = fl.gr * fr
    Fz = fl.gz * fz
    return -(Fr[1:] - Fr[:-1] + Fz[:, 1:] - Fz[:, :-1]) / fl.vol


def advect(q: np.ndarray, grid: GridSpec, parity: str, fl: Fluxes, dt: float,
           scheme: str = "upwind2", extra: Callable | None = None) -> np.ndarray:
    """Two-stage step: SSP-RK2 for ``upwind2``, Heun for ``centered_rk2``
    (same stages, different face values).  ``extra(q)`` adds a source."""
    def rhs(x):
        out = advection_rhs(x, grid, parity, fl, scheme)
        return out if extra is None else out + extra(x)

    q1 = q + dt * rhs(q)
    return 0.5 * (q + q1 + dt * rhs(q1))


def stable_dt(v: VelocityRZ, fl: Fluxes, dt: float, cfl_max: float) -> float:
    """``dt / 2^k`` for the smallest ``k`` meeting both CFL limits."""
    g = v.grid
    speed = v.max_speed()
    rate = float(fl.outflow_rate().max())
    for k in range(_MAX_HALVINGS):
        d = dt * 0.5**k
        if d * speed / min(g.dr, g.dz) <= cfl_max and d * rate <= cfl_max:
            return d
    raise BlowUpError(f"CFL limit needs dt < {d:.3g}; velocity {speed:.3g}", None)


# ---------------------------------------------------------------------------
# implicit stage

def _implicit(grid: GridSpec, tag: str, coef: float, rhs: np.ndarray) -> np.ndarray:
    if coef == 0.0:
        return rhs
    solver = linsolve.solver_for(grid, tag, 1.0, -coef)
    x, _ = solver.solve(rhs)
    return x.reshape(grid.shape)


def _apply(grid: GridSpec, tag: str, values: np.ndarray) -> np.ndarray:
    return (linsolve.matrix(grid, tag) @ values.ravel()).reshape(grid.shape)


def _dr_even_matrix(grid):
    return linsolve._kron_r(grid, linsolve.radial_d1(grid, EVEN))


def _guard(state: SimState, limit: float, checkpoint=None):
    for name, a in (("rho", state.rho.values), ("zeta", state.zeta.values),
                    ("v^r", state.v.vr.values), ("v^z", state.v.vz.values)):
        m = float(np.max(np.abs(a)))
        if not math.isfinite(m) or m > limit:
            raise BlowUpError(f"{name} reached {m:.3g} at t={state.t:.4g}", checkpoint)


def step(state: SimState, cfg: StepConfig, dt: float | None = None) -> SimState:
    """Advance one step; ``dt`` overrides ``cfg.dt`` (still CFL-limited)."""
    g = state.grid
    fl = fluxes_for(state.v)
    dt = cfg.dt if dt is None else dt
    if cfg.adaptive_dt:
        dt = stable_dt(state.v, fl, dt, cfg.cfl_max)
    scheme = cfg.advection_scheme

    rho_s = advect(state.rho.values, g, EVEN, fl, dt, scheme)
    rho_new = _implicit(g, "laplacian", dt * state.kappa, rho_s)

    if cfg.formulation == "zeta":
        zeta_s = advect(state.zeta.values, g, EVEN, fl, dt, scheme)
        buoy = _apply(g, "dr_over_r", rho_new)
        zeta_new = _implicit(g, "modified_laplacian", dt, zeta_s - dt * buoy)
    else:
        # omega_theta form: stretching (v^r / r) omega kept explicit
        stretch = state.v.vr.values / g.r[:, None]
        om = state.zeta.values * g.r[:, None]
        om_s = advect(om, g, ODD, fl, dt, scheme, extra=lambda x: stretch * x)
        dr_rho = (_dr_even_matrix(g) @ rho_new.ravel()).reshape(g.shape)
        om_new = _implicit(g, "vector_laplacian", dt, om_s - dt * dr_rho)
        zeta_new = om_new / g.r[:, None]

    rho_f = state.rho.with_values(rho_new)
    zeta_f = state.zeta.with_values(zeta_new)
    new = SimState(state.t + dt, state.kappa, rho_f, zeta_f, biot_savart(times_r(zeta_f)))
    if cfg.check_parity:
        assert new.rho.parity == EVEN and new.zeta.parity == EVEN
        assert new.v.vr.parity == ODD and new.v.vz.parity == EVEN
    _guard(new, cfg.overflow_guard)
    return new


# ---------------------------------------------------------------------------
# presets

def gaussian(r, z, amp=1.0, width=1.0, z0=0.0):
    return amp * np.exp(-(r**2 + (z - z0) ** 2) / width**2)


def vortex_ring(r, z, amp=1.0, r0=1.0, z0=0.0, sigma=0.5):
    """Even-in-r ring of reduced vorticity centred at ``(r0, z0)``; the mirror
    image at ``-r0`` makes it smooth across the axis."""
    bump = lambda s: np.exp(-((s - r0) ** 2 + (z - z0) ** 2) / sigma**2)
    return amp * (bump(r) + bump(-r))


def cellular_stream(r, z, amp=1.0, k=5 * np.pi / 8, width=1.0):
    """Odd stream function ``amp r exp(-r^2/width^2) cos(k z)`` of a stack of
    counter-rotating toroidal cells.

    The default ``k`` puts zeros of the cosine at ``z = +-4``, so on the
    default box the axial walls are streamlines.
    """
    return amp * r * np.exp(-(r / width) ** 2) * np.cos(k * z)


def cellular_flow(grid: GridSpec, amp=1.0, k=5 * np.pi / 8, width=1.0) -> VelocityRZ:
    psi = ScalarFieldRZ.from_function(grid, lambda r, z: cellular_stream(r, z, amp, k, width), ODD)
    return stream_to_velocity(psi)


PRESETS_RHO = {
    "zero": lambda r, z, **kw: 0.0 * r * z,
    "gaussian": gaussian,
}
PRESETS_ZETA = {
    "zero": lambda r, z, **kw: 0.0 * r * z,
    "vortex_ring": vortex_ring,
    "gaussian": gaussian,
}


def initial_state(grid: GridSpec, kappa: float, rho: str = "gaussian", zeta: str = "zero",
                  rho_params: dict | None = None, zeta_params: dict | None = None) -> SimState:
    """Build a state from named presets.

    ``zeta = "half_rho"`` sets ``zeta = rho / 2``, the data for which the
    near-one unknown vanishes initially.
    """
    if rho not in PRESETS_RHO:
        raise KeyError(f"unknown rho preset {rho!r}")
    rp = rho_params or {}
    rho_f = ScalarFieldRZ.from_function(grid, lambda r, z: PRESETS_RHO[rho](r, z, **rp))
    if zeta == "half_rho":
        zeta_f = 0.5 * rho_f
    elif zeta in PRESETS_ZETA:
        zp = zeta_params or {}
        zeta_f = ScalarFieldRZ.from_function(grid, lambda r, z: PRESETS_ZETA[zeta](r, z, **zp))
    else:
        raise KeyError(f"unknown zeta preset {zeta!r}")
    return make_state(rho_f, zeta_f, kappa)


# ---------------------------------------------------------------------------
# runs

def _grad_sq(f: ScalarFieldRZ) -> float:
    fr, fz = gradient(f)
    return integrate(f.grid, fr**2 + fz**2)


@dataclass
class RunSeries:
    """Time series recorded by :func:`run`.

    ``columns`` maps names to lists sampled every ``cadence`` steps (plus the
    first and last state).  Running time integrals are updated every step by
    the trapezoid rule and sampled with the rest.  ``l2_gamma`` holds the
    unknown of the branch selected by ``kappa``.
    """

    kappa: float
    branch: str
    dt: float
    grid: GridSpec
    columns: dict = field(default_factory=dict)
    states: list = field(default_factory=list)
    steps: int = 0

    def __getitem__(self, name) -> np.ndarray:
        from .errors import MissingSeriesError
        if name not in self.columns:
            raise MissingSeriesError(name)
        return np.asarray(self.columns[name], dtype=float)

    def __contains__(self, name) -> bool:
        return name in self.columns

    def __len__(self) -> int:
        return len(self.columns.get("t", []))

    def rows(self, names=TIMESERIES_COLUMNS) -> list[dict]:
        return [{n: self.columns[n][i] for n in names} for i in range(len(self))]

    def with_column(self, name, values) -> "RunSeries":
        cols = dict(self.columns)
        cols[name] = list(np.asarray(values, dtype=float))
        return replace(self, columns=cols)


class _Recorder:
    """Per-step quantities and running integrals."""

    def __init__(self, state: SimState, record_besov: bool, keep_states: bool):
        self.branch = select_branch(state.kappa)
        self.record_besov = record_besov
        self.keep_states = keep_states
        self.series = None
        self.integrals = {k: 0.0 for k in ("int_grad_v_sq", "int_grad_gamma_sq",
                                           "int_grad_v_linf", "int_grad_rho_sq")}
        self.prev = self._instant(state)

    def _instant(self, s: SimState) -> dict:
        gam = (gamma_near_one(s.zeta, s.rho) if self.branch == NEAR_ONE
               else gamma_general(s.zeta, s.rho, s.kappa))
        self._gamma = gam
        return {"grad_v_sq": integrate(s.grid, velocity_gradient_sq(s.v)),
                "grad_gamma_sq": _grad_sq(gam),
                "grad_v_linf": velocity_grad_linf(s.v),
                "grad_rho_sq": _grad_sq(s.rho)}

    def advance(self, s: SimState, dt: float):
        cur = self._instant(s)
        for k in ("grad_v_sq", "grad_gamma_sq", "grad_v_linf", "grad_rho_sq"):
            self.integrals["int_" + k] += 0.5 * dt * (self.prev[k] + cur[k])
        self.prev = cur

    def sample(self, s: SimState) -> dict:
        from .lpbesov import besov_norm, build_partition

        row = {
            "t": s.t,
            "l2_rho": lp_norm(s.rho, 2), "linf_rho": lp_norm(s.rho, np.inf),
            "l3_rho": lp_norm(s.rho, 3), "l1_rho": lp_norm(s.rho, 1),
            "l2_v": velocity_l2(s.v), "h1_v": velocity_h1_seminorm(s.v),
            "l2_zeta": lp_norm(s.zeta, 2), "l2_gamma": lp_norm(self._gamma, 2),
            "l2_omega": lp_norm(s.omega, 2),
            "l6_vr_over_r": lp_norm(s.v.vr.values / s.grid.r[:, None], 6, s.grid),
            "besov_b31_0_rho": (besov_norm(s.rho, 0.0, 3.0, 1.0, build_partition(s.grid))
                                if self.record_besov else float("nan")),
        }
        row.update(self.integrals)
        return row


def _new_series(state: SimState, cfg: StepConfig, branch: str) -> RunSeries:
    return RunSeries(state.kappa, branch, cfg.dt, state.grid)


def _append(series: RunSeries, row: dict):
    for k, v in row.items():
        series.columns.setdefault(k, []).append(float(v))


def run(initial: SimState, cfg: StepConfig, t_end: float, cadence: int = 1,
        checkpoint_dir=None, checkpoint_every: int = 0, record_besov: bool = False,
        keep_states: bool = False, progress: Callable | None = None) -> tuple[SimState, RunSeries]:
    """Integrate to ``t_end`` and return the final state with its series.

    Checkpoints go to ``checkpoint_dir/step_XXXXXX.axbq`` every
    ``checkpoint_every`` steps and once at the end.  On blow-up the raised
    error carries the path of the last checkpoint written (or the last
    healthy state when no directory was given).
    """
    if cadence < 1:
        raise ValueError("cadence must be >= 1")
    rec = _Recorder(initial, record_besov, keep_states)
    series = _new_series(initial, cfg, rec.branch)
    if t_end <= initial.t:
        return initial, series

    ckdir = Path(checkpoint_dir) if checkpoint_dir is not None else None
    last_ck = None
    if ckdir is not None:
        ckdir.mkdir(parents=True, exist_ok=True)
        last_ck = write_checkpoint(ckdir / "step_000000.axbq", initial)

    _append(series, rec.sample(initial))
    if keep_states:
        series.states.append(initial)
    state, n = initial, 0
    eps = 1e-12 * max(1.0, t_end)
    while state.t < t_end - eps:
        dt = min(cfg.dt, t_end - state.t)
        try:
            new = step(state, cfg, dt)
        except BlowUpError as exc:
            raise BlowUpError(str(exc), last_ck if last_ck is not None else state) from None
        n += 1
        rec.advance(new, new.t - state.t)
        state = new
        done = state.t >= t_end - eps
        if n % cadence == 0 or done:
            _append(series, rec.sample(state))
            if keep_states:
                series.states.append(state)
        if ckdir is not None and ((checkpoint_every and n % checkpoint_every == 0) or done):
            last_ck = write_checkpoint(ckdir / f"step_{n:06d}.axbq", state)
        if progress is not None:
            progress(state)
    series.steps = n
    log.info("run finished: %d steps to t=%.4g (kappa=%g)", n, state.t, state.kappa)
    return state, series


def run_transport_diffusion(rho0: ScalarFieldRZ, v_prescribed, kappa: float, cfg: StepConfig,
                            t_end: float, cadence: int = 1, p: float = 3.0,
                            record_besov: bool = True) -> RunSeries:
    """Evolve ``(d_t + v.grad - kappa Delta) rho = 0`` for a prescribed flow.

    ``v_prescribed`` is a :class:`VelocityRZ` or a callable ``t -> VelocityRZ``.
    Records ``besov_b0p1_rho`` (``B^0_{p,1}``), ``int_grad_v_linf`` and the
    usual ``rho`` norms.
    """
    from .lpbesov import besov_norm, build_partition

    provider = v_prescribed if callable(v_prescribed) else (lambda t: v_prescribed)
    g = rho0.grid
    part = build_partition(g) if record_besov else None
    series = RunSeries(kappa, "transport", cfg.dt, g)

    def sample(t, rho, integ):
        row = {"t": t, "l2_rho": lp_norm(rho, 2), "linf_rho": lp_norm(rho, np.inf),
               "int_grad_v_linf": integ, "int_grad_rho_sq": int_grad_rho,
               "besov_b0p1_rho": besov_norm(rho, 0.0, p, 1.0, part) if record_besov else float("nan")}
        _append(series, row)

    rho, t, n = rho0, 0.0, 0
    v = provider(t)
    gv_prev, gr_prev = velocity_grad_linf(v), _grad_sq(rho)
    integ = int_grad_rho = 0.0
    sample(t, rho, integ)
    eps = 1e-12 * max(1.0, t_end)
    while t < t_end - eps:
        fl = fluxes_for(v)
        dt = stable_dt(v, fl, min(cfg.dt, t_end - t), cfg.cfl_max)
        vals = advect(rho.values, g, EVEN, fl, dt, cfg.advection_scheme)
        vals = _implicit(g, "laplacian", dt * kappa, vals)
        rho = rho.with_values(vals)
        t += dt
        n += 1
        m = float(np.max(np.abs(vals)))
        if not math.isfinite(m) or m > cfg.overflow_guard:
            raise BlowUpError(f"rho reached {m:.3g} at t={t:.4g}", rho)
        v = provider(t)
        gv, gr = velocity_grad_linf(v), _grad_sq(rho)
        integ += 0.5 * dt * (gv_prev + gv)
        int_grad_rho += 0.5 * dt * (gr_prev + gr)
        gv_prev, gr_prev = gv, gr
        if n % cadence == 0 or t >= t_end - eps:
            sample(t, rho, integ)
    series.steps = n
    return series
