"""A priori estimates turned into pass/fail checks on recorded series.

Two kinds of check live here.  Inequalities with explicit constants (the
maximum principle, the integrated energy bound) compare each sample with its
bound directly.  The others only claim *some* constant exists; for those the
check fits the smallest constant that works on the series and reports it.
Handing the check a ``constant`` from another run (a coarser grid, the
unmodified series) turns it back into a hard comparison, which is what
refinement studies and the mutation self-test do.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import lambertw

from . import linsolve
from .coupling import NEAR_ONE
from .cylgrid import ScalarFieldRZ, integrate, velocity_gradient_sq, velocity_l2
from .errors import ConfigMismatchError, MissingSeriesError, NearOneBranchError, WrongBranchError

OVERFLOW_GUARD = 1e8
DEGENERATE = 1e-14
FIT_TOL = 1e-9   # rounding slack for a constant fitted on the same series

TOLERANCES = {
    "max_principle": 0.01,
    "energy_envelope": 0.05,
    "energy_linear_growth": 0.05,
    "energy_rate": 0.05,
    "zeta_monotone": 1e-3,
    "zeta_envelope": FIT_TOL,
    "gamma_energy": FIT_TOL,
    "gamma1_energy": FIT_TOL,
    "hls": FIT_TOL,
    "log_estimate": FIT_TOL,
    "stability_dv_h1": FIT_TOL,
    "stability_drho_hm1": FIT_TOL,
}
REFINEMENT_BAND = 0.20


@dataclass(frozen=True)
class Row:
    t: float
    name: str
    lhs: float
    rhs: float
    passed: bool
    check: str = ""


@dataclass
class EstimateReport:
    rows: list = field(default_factory=list)
    fitted_constants: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def add(self, check: str, name: str, t, lhs, rhs, tol: float):
        self.tolerances[name] = tol
        t, lhs, rhs = np.broadcast_arrays(np.atleast_1d(t), np.atleast_1d(lhs), np.atleast_1d(rhs))
        for ti, a, b in zip(t, lhs, rhs):
            a, b = float(a), float(b)
            ok = bool(np.isfinite(a) and np.isfinite(b) and a <= b * (1 + tol))
            self.rows.append(Row(float(ti), name, a, b, ok, check))

    def merge(self, other: "EstimateReport") -> "EstimateReport":
        out = EstimateReport(self.rows + other.rows, {**self.fitted_constants, **other.fitted_constants},
                             {**self.tolerances, **other.tolerances}, {**self.flags, **other.flags})
        out.rows.sort(key=lambda r: (r.t, r.name))
        return out

    def names(self) -> list[str]:
        return sorted({r.name for r in self.rows})

    def checks(self) -> list[str]:
        return sorted({r.check for r in self.rows})

    def failed_checks(self) -> set[str]:
        return {r.check for r in self.rows if not r.passed} | {
            k for k, v in self.flags.items() if v == "fit_failed"}

    def passed(self, name: str | None = None) -> bool:
        rows = [r for r in self.rows if name is None or r.name == name or r.check == name]
        return all(r.passed for r in rows) and not (
            name is None and any(v == "fit_failed" for v in self.flags.values()))

    def verdict(self) -> list[dict]:
        out = []
        for name in self.names():
            rows = [r for r in self.rows if r.name == name]
            n_pass = sum(r.passed for r in rows)
            out.append({"name": name, "pass_count": n_pass, "fail_count": len(rows) - n_pass,
                        "fitted_constant": self.fitted_constants.get(name, float("nan")),
                        "tolerance": self.tolerances.get(name, float("nan"))})
        return out


VERDICT_COLUMNS = ("name", "pass_count", "fail_count", "fitted_constant", "tolerance")


def write_verdict(path, report: EstimateReport) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=VERDICT_COLUMNS)
        w.writeheader()
        for row in report.verdict():
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()})
    return path


def _col(series, name) -> np.ndarray:
    try:
        return np.asarray(series[name], dtype=float)
    except KeyError:
        raise MissingSeriesError(f"series has no {name!r} column") from None


# ---------------------------------------------------------------------------
# fits

def fit_exp_envelope(t, y) -> float:
    """Smallest ``C >= 0`` with ``y(t) <= C exp(C t)`` at every sample.

    Per sample the binding value is ``W(y t) / t`` (Lambert W), or ``y`` at
    ``t = 0``.
    """
    t = np.asarray(t, float)
    y = np.maximum(np.asarray(y, float), 0.0)
    if not np.all(np.isfinite(y)):
        return float("inf")
    c = np.where(t > 0, np.real(lambertw(y * t)) / np.where(t > 0, t, 1.0), y)
    return float(np.max(c, initial=0.0))


def _binding_index(t, y, c) -> int:
    """Sample at which the fitted envelope is attained."""
    t = np.asarray(t, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.asarray(y, float) / (c * np.exp(c * t))
    ratio = np.nan_to_num(ratio, nan=-np.inf)
    return int(np.argmax(ratio))


def growth_rate(t, y) -> float:
    """``max(0, max_t log(y/y0)/t)``: zero for a non-increasing series."""
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    if y[0] <= 0 or len(t) < 2:
        return 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.log(np.maximum(y[1:], 1e-300) / y[0]) / t[1:]
    return float(max(0.0, np.nanmax(g)))


def _fitted(report, check, name, t, lhs, c_fit, constant, rhs_fn):
    """Rows for a fitted check: against ``constant`` if given, else ``c_fit``."""
    c = c_fit if constant is None else float(constant)
    report.fitted_constants[name] = c_fit
    if not np.isfinite(c_fit) or c_fit > OVERFLOW_GUARD:
        report.flags[check] = "fit_failed"
    report.add(check, name, t, lhs, rhs_fn(c), TOLERANCES[name])


# ---------------------------------------------------------------------------
# checks

def check_max_principle(series, p: float = 2.0, tol: float | None = None) -> EstimateReport:
    """``||rho(t)||_p <= ||rho_0||_p``."""
    key = {1.0: "l1_rho", 2.0: "l2_rho", 3.0: "l3_rho", np.inf: "linf_rho"}.get(float(p))
    if key is None:
        raise ValueError(f"no recorded norm for p={p}")
    t, y = _col(series, "t"), _col(series, key)
    rep = EstimateReport()
    name = f"max_principle_{'inf' if np.isinf(p) else int(p)}"
    rep.add("max_principle", name, t, y, np.full_like(y, y[0]),
            TOLERANCES["max_principle"] if tol is None else tol)
    return rep


def check_energy(series, tol: float | None = None, half: bool = True) -> EstimateReport:
    """Velocity energy bounds.

    ``energy_envelope``: ``a ||v||^2 + int ||grad v||^2 <= ||v0||^2/2 +
    (||v0|| + t ||rho0||) ||rho0|| t`` with ``a = 1/2`` (``half=False`` uses
    ``a = 1``).  ``energy_linear_growth``: ``||v|| <= ||v0|| + t ||rho0||``.
    ``energy_rate``: the centred time derivative of ``||v||^2/2 + int ||grad
    v||^2`` against ``||v|| ||rho||``.  The solver dissipates at the new time
    level while the recorded integral is a trapezoid sum, which shifts the
    bookkeeping by up to ``dt * max |d/dt ||grad v||^2|``; that amount is
    added to the right side.  The envelope gets no such allowance: at
    ``dt = 0.05`` a vortex ring with no buoyancy overshoots it by about 6%,
    at ``dt = 0.01`` it passes, so keep ``dt`` small when this check matters.
    """
    t = _col(series, "t")
    v, rho = _col(series, "l2_v"), _col(series, "l2_rho")
    diss = _col(series, "int_grad_v_sq")
    grad_sq = _col(series, "h1_v") ** 2
    rep = EstimateReport()
    v0, r0 = v[0], rho[0]
    a = 0.5 if half else 1.0
    tol_e = TOLERANCES["energy_envelope"] if tol is None else tol
    rep.add("energy", "energy_envelope", t, a * v**2 + diss,
            0.5 * v0**2 + (v0 + t * r0) * r0 * t, tol_e)
    rep.add("energy", "energy_linear_growth", t, v, v0 + t * r0,
            TOLERANCES["energy_linear_growth"] if tol is None else tol)
    if len(t) >= 2:
        e = 0.5 * v**2 + diss
        de = np.gradient(e, t)
        dt = getattr(series, "dt", None) or float(np.min(np.diff(t)))
        allowance = dt * float(np.max(np.abs(np.gradient(grad_sq, t))))
        rep.add("energy", "energy_rate", t, de, v * rho + allowance,
                TOLERANCES["energy_rate"] if tol is None else tol)
    return rep


def check_zeta_monotone(series, tol: float | None = None) -> EstimateReport:
    """``||zeta||_2`` non-increasing between consecutive samples."""
    t, z = _col(series, "t"), _col(series, "l2_zeta")
    rep = EstimateReport()
    rep.add("zeta_monotone", "zeta_monotone", t[1:], z[1:], z[:-1],
            TOLERANCES["zeta_monotone"] if tol is None else tol)
    return rep


def check_zeta_envelope(series, constant: float | None = None) -> EstimateReport:
    """``||zeta(t)||_2 <= C0 exp(C0 t)`` with the smallest such ``C0``."""
    t, z = _col(series, "t"), _col(series, "l2_zeta")
    rep = EstimateReport()
    c = fit_exp_envelope(t, z)
    _fitted(rep, "zeta_envelope", "zeta_envelope", t, z, c, constant,
            lambda C: C * np.exp(C * t))
    rep.fitted_constants["zeta_growth_rate"] = growth_rate(t, z)
    return rep


def _branch(series) -> str | None:
    return getattr(series, "branch", None)


def check_gamma_energy(series, constant: float | None = None) -> EstimateReport:
    """``||Gamma||^2 + int ||grad Gamma||^2 <= C0 exp(C0 t)`` (general branch)."""
    if _branch(series) == NEAR_ONE:
        raise NearOneBranchError("series recorded Gamma_1; use check_gamma1_energy")
    t = _col(series, "t")
    lhs = _col(series, "l2_gamma") ** 2 + _col(series, "int_grad_gamma_sq")
    rep = EstimateReport()
    c = fit_exp_envelope(t, lhs)
    _fitted(rep, "gamma_energy", "gamma_energy", t, lhs, c, constant,
            lambda C: C * np.exp(C * t))
    return rep


def gamma1_source_factor(kappa: float) -> float:
    return (kappa - 1.0) ** 2 / np.sqrt(kappa)


def check_gamma1_energy(series, kappa: float | None = None,
                        constant: float | None = None) -> EstimateReport:
    """``||G1||^2 + int ||grad G1||^2 <= C (k-1)^2 k^{-1/2} ||rho0||^2 + ||G1(0)||^2``.

    ``C`` is fitted; with ``kappa = 1`` the source vanishes and the check
    reduces to ``lhs <= ||G1(0)||^2`` up to a 1e-12 absolute slack.
    """
    kappa = getattr(series, "kappa", None) if kappa is None else kappa
    branch = _branch(series)
    if branch is not None and branch != NEAR_ONE:
        raise WrongBranchError(f"series used the {branch} branch")
    from .coupling import select_branch
    if select_branch(kappa) != NEAR_ONE:
        raise WrongBranchError(f"kappa={kappa} is not in the near-one range")
    t = _col(series, "t")
    g1 = _col(series, "l2_gamma")
    lhs = g1**2 + _col(series, "int_grad_gamma_sq")
    base = g1[0] ** 2 + 1e-12
    scale = gamma1_source_factor(kappa) * _col(series, "l2_rho")[0] ** 2
    excess = np.maximum(lhs - base, 0.0)
    if scale > 0:
        c = float(np.max(excess / scale))
    else:
        c = 0.0 if np.all(excess == 0) else float("inf")
    rep = EstimateReport()
    _fitted(rep, "gamma1_energy", "gamma1_energy", t, lhs, c, constant,
            lambda C: C * scale + base)
    return rep


def check_hls(series, constant: float | None = None) -> EstimateReport:
    """``||v^r / r||_6 <= C ||zeta||_2``; samples with ``||zeta|| < 1e-14`` are
    flagged degenerate and skipped."""
    t = _col(series, "t")
    num, den = _col(series, "l6_vr_over_r"), _col(series, "l2_zeta")
    ok = den >= DEGENERATE
    rep = EstimateReport()
    if not np.any(ok):
        rep.flags["hls"] = "degenerate"
        return rep
    ratio = num[ok] / den[ok]
    c = float(np.max(ratio))
    _fitted(rep, "hls", "hls", t[ok], ratio, c, constant, lambda C: np.full_like(ratio, C))
    if not np.all(ok):
        rep.flags["hls"] = "degenerate"
    return rep


def hls_ratio(zeta: ScalarFieldRZ) -> float:
    """``||v^r/r||_6 / ||zeta||_2`` for the velocity of ``zeta`` (NaN if degenerate)."""
    from .cylgrid import lp_norm
    from .diffops import biot_savart, times_r

    den = lp_norm(zeta, 2)
    if den < DEGENERATE:
        return float("nan")
    v = biot_savart(times_r(zeta))
    return lp_norm(v.vr.values / zeta.grid.r[:, None], 6, zeta.grid) / den


def check_log_estimate(series, constant: float | None = None,
                       column: str = "besov_b0p1_rho") -> EstimateReport:
    """``||rho(t)||_B <= C ||rho0||_B (1 + int ||grad v||_inf)`` (no forcing).

    Also records ``log_estimate_exp_rate = max log(B/B0) / int ||grad v||_inf``,
    which stays bounded by ``log(C)/I + log(1+I)/I`` when growth is linear.
    """
    t = _col(series, "t")
    b = _col(series, column)
    if not np.all(np.isfinite(b)):
        raise MissingSeriesError(f"{column} not recorded")
    integ = _col(series, "int_grad_v_linf")
    amp = b[0] * (1 + integ)
    c = float(np.max(b / amp)) if b[0] > 0 else (0.0 if np.all(b == 0) else float("inf"))
    rep = EstimateReport()
    _fitted(rep, "log_estimate", "log_estimate", t, b, c, constant, lambda C: C * amp)
    pos = integ > 0
    if np.any(pos) and b[0] > 0:
        rep.fitted_constants["log_estimate_exp_rate"] = float(
            np.max(np.log(b[pos] / b[0]) / integ[pos]))
    return rep


# ---------------------------------------------------------------------------
# stability

def hm1_norm(g: ScalarFieldRZ) -> float:
    """``sqrt(<g, (-Delta)^{-1} g>)`` with the Dirichlet Poisson solve."""
    if not np.any(g.values):
        return 0.0
    solver = linsolve.solver_for(g.grid, "laplacian", 0.0, -1.0)
    u, _ = solver.solve(g.values)
    return float(np.sqrt(max(integrate(g.grid, g.values * u.reshape(g.grid.shape)), 0.0)))


@dataclass
class DistanceSeries:
    t: np.ndarray
    dv_h1: np.ndarray
    drho_hm1: np.ndarray
    delta0: float

    def __getitem__(self, name):
        return getattr(self, name)


def run_distance(run_a, run_b, delta0: float) -> DistanceSeries:
    """Distances between two runs sampled at the same times.

    Both need ``keep_states=True`` and identical grid, dt, kappa and times.
    """
    if (run_a.grid != run_b.grid or run_a.dt != run_b.dt or run_a.kappa != run_b.kappa
            or len(run_a.states) != len(run_b.states) or not run_a.states):
        raise ConfigMismatchError("runs differ in grid, dt, kappa or sampling")
    ta = np.array([s.t for s in run_a.states])
    tb = np.array([s.t for s in run_b.states])
    if not np.array_equal(ta, tb):
        raise ConfigMismatchError("runs were sampled at different times")
    dv, dr = [], []
    for a, b in zip(run_a.states, run_b.states):
        from .cylgrid import VelocityRZ
        dvel = VelocityRZ(a.v.vr - b.v.vr, a.v.vz - b.v.vz)
        h1 = np.sqrt(velocity_l2(dvel) ** 2 + integrate(a.grid, velocity_gradient_sq(dvel)))
        dv.append(h1)
        dr.append(hm1_norm(a.rho - b.rho))
    return DistanceSeries(ta, np.array(dv), np.array(dr), float(delta0))


def check_stability(run_a, run_b=None, delta0: float | None = None,
                    constants: dict | None = None) -> EstimateReport:
    """``sup_t ||dv||_{H^1} <= C delta0`` and ``sup_t ||drho||_{H^-1} <= C delta0``.

    ``run_a`` may already be a :class:`DistanceSeries`.
    """
    dist = run_a if isinstance(run_a, DistanceSeries) else run_distance(run_a, run_b, delta0)
    constants = constants or {}
    rep = EstimateReport()
    d0 = dist.delta0
    for name, col in (("stability_dv_h1", dist.dv_h1), ("stability_drho_hm1", dist.drho_hm1)):
        if d0 == 0:
            c = 0.0 if not np.any(col) else float("inf")
        else:
            c = float(np.max(col)) / d0
        _fitted(rep, "stability", name, dist.t, col, c, constants.get(name),
                lambda C: np.full_like(col, C * d0))
    return rep


# ---------------------------------------------------------------------------
# mutation self-test

def splice(series, column: str, factor: float = 2.0, start: int | None = None):
    """Copy of ``series`` with ``column`` multiplied by ``factor`` from sample
    ``start`` on (default: the middle sample)."""
    vals = np.array(_col(series, column), dtype=float)
    k = len(vals) // 2 if start is None else int(start)
    vals[k:] *= factor
    if isinstance(series, DistanceSeries):
        return replace(series, **{column: vals})
    if hasattr(series, "with_column"):
        return series.with_column(column, vals)
    out = dict(series)
    out[column] = vals
    return out


# check name -> (function, spliced column, keyword for a reference constant)
CHECKS = {
    "max_principle": (lambda s, c: check_max_principle(s, 2.0).merge(
        check_max_principle(s, np.inf)), None),
    "energy": (lambda s, c: check_energy(s), None),
    "zeta_monotone": (lambda s, c: check_zeta_monotone(s), None),
    "zeta_envelope": (lambda s, c: check_zeta_envelope(s, c.get("zeta_envelope")), "l2_zeta"),
    "gamma_energy": (lambda s, c: check_gamma_energy(s, c.get("gamma_energy")), "l2_gamma"),
    "gamma1_energy": (lambda s, c: check_gamma1_energy(s, constant=c.get("gamma1_energy")),
                      "l2_gamma"),
    "hls": (lambda s, c: check_hls(s, c.get("hls")), "l6_vr_over_r"),
    "log_estimate": (lambda s, c: check_log_estimate(s, c.get("log_estimate")), "besov_b0p1_rho"),
    "stability": (lambda s, c: check_stability(s, constants=c), "dv_h1"),
}
SPLICE_COLUMN = {"max_principle": "l2_rho", "energy": "l2_v", "zeta_monotone": "l2_zeta",
                 "zeta_envelope": "l2_zeta", "gamma_energy": "l2_gamma",
                 "gamma1_energy": "l2_gamma", "hls": "l6_vr_over_r",
                 "log_estimate": "besov_b0p1_rho", "stability": "dv_h1"}


def run_checks(series, names, constants: dict | None = None) -> EstimateReport:
    constants = constants or {}
    rep = EstimateReport()
    for n in names:
        rep = rep.merge(CHECKS[n][0](series, constants))
    return rep


def _splice_start(series, target: str, clean: EstimateReport) -> int:
    """Explicit bounds are spliced from the middle (their right side depends
    on the initial sample); fitted ones from the sample where the fitted
    constant is attained, but never at the initial sample."""
    if CHECKS[target][1] is None:
        return len(_col(series, "t")) // 2
    rows = [r for r in clean.rows if r.check == target]
    ratios = np.array([r.lhs / r.rhs if r.rhs > 0 else -np.inf for r in rows])
    k = int(np.argmax(ratios))
    # rows of a fitted check may skip degenerate samples; map back by time
    t_all = _col(series, "t")
    k = int(np.searchsorted(t_all, rows[k].t))
    return max(k, 1)


@dataclass(frozen=True)
class MutationResult:
    target: str
    failed: frozenset
    clean_failed: frozenset

    @property
    def ok(self) -> bool:
        return not self.clean_failed and self.failed == {self.target}


def mutation_self_test(cases, factor: float = 2.0) -> list[MutationResult]:
    """``cases``: iterable of ``(target, series, applicable_check_names)``.

    Fits every applicable check on the clean series, splices the target's
    column, re-runs all applicable checks with the clean constants and
    records which fail.
    """
    out = []
    for target, series, names in cases:
        clean = run_checks(series, names)
        consts = {k: v for k, v in clean.fitted_constants.items()}
        start = _splice_start(series, target, clean)
        bad = splice(series, SPLICE_COLUMN[target], factor, start)
        spliced = run_checks(bad, names, consts)
        out.append(MutationResult(target, frozenset(spliced.failed_checks()),
                                  frozenset(clean.failed_checks())))
    return out
