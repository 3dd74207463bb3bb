"""Run experiments, verify operators, emit plot data.

Not installed as a console script; call :func:`main` or use ``python3 -m``::

    python3 -m axiboussinesq.cli run         --config exp.cfg --out DIR [--kappa K] [--seed S]
    python3 -m axiboussinesq.cli verify      [--config exp.cfg] [--out DIR] [--seed S] [--mutate]
    python3 -m axiboussinesq.cli convergence [--out DIR]
    python3 -m axiboussinesq.cli plotdata    RUN_DIR

``AXIBQ_THREADS`` caps the BLAS/OpenMP thread count.
"""

from __future__ import annotations

import os
import sys

if os.environ.get("AXIBQ_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["AXIBQ_THREADS"])

import argparse  # noqa: E402
import contextlib  # noqa: E402
import logging  # noqa: E402
from pathlib import Path  # noqa: E402

import numpy as np  # noqa: E402

from . import coupling, evolve, lpbesov, monitor, singell  # noqa: E402
from .config import ExperimentConfig, load_config, serialize_config, validate  # noqa: E402
from .cylgrid import EVEN, ODD, ScalarFieldRZ, make_grid  # noqa: E402
from .errors import AxiBQError, BlowUpError, GridTooCoarseError, MissingRunError  # noqa: E402
from .io import TIMESERIES_COLUMNS, read_table, table_column, write_table  # noqa: E402
from .random_fields import random_bump_fields  # noqa: E402

log = logging.getLogger("axibq")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_ERROR, EXIT_BLOWUP = 0, 1, 2, 3
CONVERGENCE_COLUMNS = ("h", "l2_error", "order_estimate", "ratio_lp")
IDENTITY_COLUMNS = ("h", "residual_lemLD", "residual_leme1", "order_estimate")


# ---------------------------------------------------------------------------
# run

def _grid(cfg: ExperimentConfig):
    g = cfg.grid
    return make_grid(g.nr, g.nz, g.rmax, g.zmin, g.zmax, g.z_bc)


def _initial(cfg: ExperimentConfig, grid, kappa: float):
    i = cfg.init
    rho_p = {"amp": i.rho_amp, "width": i.rho_width} if i.rho == "gaussian" else {}
    zeta_p = ({"amp": i.zeta_amp, "r0": i.zeta_r0, "sigma": i.zeta_sigma}
              if i.zeta == "vortex_ring" else {})
    return evolve.initial_state(grid, kappa, i.rho, i.zeta, rho_p, zeta_p)


def applicable_checks(cfg: ExperimentConfig, kappa: float) -> list[str]:
    """Enabled checks that make a claim for this run."""
    out = []
    near = coupling.select_branch(kappa) == coupling.NEAR_ONE
    for name in cfg.monitors.enabled:
        if name == "zeta_monotone" and cfg.init.rho != "zero":
            continue
        if name == "gamma_energy" and near:
            continue
        if name == "gamma1_energy" and (not near or kappa == 0):
            continue
        out.append(name)
    return out


def _kappa_dir(out: Path, kappa: float) -> Path:
    return out / f"kappa_{kappa:g}"


def run_one(cfg: ExperimentConfig, kappa: float, out: Path) -> monitor.EstimateReport:
    grid = _grid(cfg)
    state = _initial(cfg, grid, kappa)
    t = cfg.time
    step_cfg = evolve.StepConfig(dt=t.dt, cfl_max=t.cfl_max, advection_scheme=t.scheme,
                                 adaptive_dt=t.adaptive_dt)
    kdir = _kappa_dir(out, kappa)
    kdir.mkdir(parents=True, exist_ok=True)
    besov_rows = []

    final, series = evolve.run(state, step_cfg, t.t_end, t.cadence, checkpoint_dir=kdir / "checkpoints",
                               checkpoint_every=cfg.output.checkpoint_every,
                               record_besov=cfg.monitors.besov, keep_states=cfg.monitors.besov)
    if cfg.monitors.besov:
        besov_rows = [lpbesov.besov_row(s.t, s.rho, s.v) for s in series.states]
        series.states.clear()
    write_table(kdir / "timeseries.csv", TIMESERIES_COLUMNS, series.rows())
    if besov_rows:
        lpbesov.write_besov_report(kdir / "besov.csv", besov_rows)
    report = monitor.run_checks(series, applicable_checks(cfg, kappa))
    monitor.write_verdict(kdir / "verdict.csv", report)
    return report


def cmd_run(cfg: ExperimentConfig, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.cfg").write_text(serialize_config(cfg))
    merged = monitor.EstimateReport()
    for kappa in cfg.kappas:
        log.info("kappa = %g", kappa)
        try:
            rep = run_one(cfg, kappa, out)
        except BlowUpError as exc:
            print(f"blow-up at kappa={kappa:g}: {exc} (last checkpoint: {exc.checkpoint})",
                  file=sys.stderr)
            return EXIT_BLOWUP
        for r in rep.rows:
            merged.rows.append(monitor.Row(r.t, f"k{kappa:g}:{r.name}", r.lhs, r.rhs, r.passed, r.check))
        merged.tolerances.update({f"k{kappa:g}:{k}": v for k, v in rep.tolerances.items()})
        merged.fitted_constants.update({f"k{kappa:g}:{k}": v for k, v in rep.fitted_constants.items()})
        merged.flags.update({f"k{kappa:g}:{k}": v for k, v in rep.flags.items()})
    monitor.write_verdict(out / "verdict.csv", merged)
    failed = sorted(merged.failed_checks())
    if failed:
        print("failed checks: " + ", ".join(failed), file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


# ---------------------------------------------------------------------------
# convergence and verify

LADDER = (64, 128, 256)    # h = 1/16, 1/32, 1/64 on r in [0, 4], z in [-4, 4]


def ladder(z_bc: str = "dirichlet", sizes=LADDER):
    return [make_grid(n, 2 * n, 4.0, -4.0, 4.0, z_bc) for n in sizes]


def identity_rows(sizes=LADDER) -> list[dict]:
    return coupling.identity_study(
        ladder("dirichlet", sizes), singell.gaussian,
        lambda r, z: r * np.exp(-r**2 - z**2), ladder("periodic", sizes))


def cmd_convergence(out: Path, sizes=LADDER) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    grids = ladder("dirichlet", sizes)
    tables = {
        "convergence_L": singell.convergence_study(grids, 2.0, "L"),
        "convergence_Lz": singell.convergence_study(grids, 2.0, "Lz"),
    }
    for name, rows in tables.items():
        write_table(out / f"{name}.csv", CONVERGENCE_COLUMNS, rows)
    ids = identity_rows(sizes)
    write_table(out / "identities.csv", IDENTITY_COLUMNS, ids)
    tables["identities"] = ids
    return tables


@contextlib.contextmanager
def _stencil_bug():
    """Swap in a Laplacian whose first-order radial term is 10% too strong."""
    from . import diffops
    good = coupling.laplacian_axisym

    def bad(f, outer="extrapolate"):
        return good(f, outer) + 0.1 * f.with_values(
            diffops.d_r(f, outer).values / f.grid.r[:, None])

    coupling.laplacian_axisym = bad
    try:
        yield
    finally:
        coupling.laplacian_axisym = good


def property_suite(cfg: ExperimentConfig, seed: int = 0, mutate: bool = False,
                   sizes=LADDER) -> list[tuple[str, bool, str]]:
    """Time-independent checks; returns ``(name, passed, detail)`` triples."""
    g = cfg.grid
    if g.nr < 4 or g.nz < 4:
        raise GridTooCoarseError(f"grid {g.nr}x{g.nz} is too coarse (need at least 4x4)")
    grid = _grid(cfg)
    part = lpbesov.build_partition(grid)
    results = []

    xi = np.linspace(0, 2.0 ** (part.qmax + 1), 20001)
    s1, s2 = part.profile_sums(xi)
    results.append(("partition_of_unity", float(np.max(np.abs(s1 - 1))) <= 1e-12,
                    f"max |sum - 1| = {np.max(np.abs(s1 - 1)):.2e}"))
    results.append(("square_sum_bounds", bool(s2.min() >= 1 / 3 - 1e-12 and s2.max() <= 1 + 1e-12),
                    f"range [{s2.min():.4f}, {s2.max():.4f}]"))

    fields = [f.sample(grid) for f in random_bump_fields(seed, 5)]
    rec = max(float(np.sqrt(np.sum((lpbesov.decompose(f, part).reconstruct().values - f.values) ** 2)
                            / np.sum(f.values**2))) for f in fields)
    results.append(("reconstruction", rec <= 1e-10, f"max relative error {rec:.2e}"))

    ratios = []
    for q in range(1, part.qmax):
        ratios.append(lpbesov.bernstein_check(lpbesov.single_block_field(grid, q), q, part=part).ratio)
    results.append(("bernstein", all(1 / 8 <= x <= 8 for x in ratios),
                    "ratios " + ", ".join(f"{x:.3f}" for x in ratios)))

    worst = np.inf
    for f in fields:
        for p in (2.0, 3.0, 4.0):
            res = singell.ckn_check(f, p)
            if not res.degenerate:
                worst = min(worst, res.ratio - (1 - 10 * grid.h**2))
    results.append(("ckn", worst >= 0, f"min margin {worst:.3e}"))

    ctx = _stencil_bug() if mutate else contextlib.nullcontext()
    with ctx:
        ids = identity_rows(sizes)
    for key in ("residual_lemLD", "residual_leme1"):
        orders = [np.log(a[key] / b[key]) / np.log(a["h"] / b["h"]) for a, b in zip(ids, ids[1:])]
        results.append((key, min(orders) >= 1.9, "orders " + ", ".join(f"{o:.2f}" for o in orders)))

    conv = singell.convergence_study(ladder("dirichlet", sizes), 2.0, "L")
    orders = [r["order_estimate"] for r in conv[1:]]
    results.append(("op_L_order", min(orders) >= 1.9, "orders " + ", ".join(f"{o:.2f}" for o in orders)))
    return results


def cmd_verify(cfg: ExperimentConfig, out: Path | None, seed: int = 0, mutate: bool = False) -> int:
    results = property_suite(cfg, seed, mutate)
    if out is not None:
        cmd_convergence(out)
        write_table(out / "verify.csv", ("name", "passed", "detail"), results)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# plot data

def cmd_plotdata(run_dir: Path) -> list[Path]:
    """One two-column ``.dat`` file per monitored norm and per convergence
    table, plus ``overlay_kappa.dat`` (long format, first column kappa) when
    the directory holds a sweep."""
    run_dir = Path(run_dir)
    series_files = sorted(run_dir.glob("kappa_*/timeseries.csv"))
    conv_files = [run_dir / f"{n}.csv" for n in ("convergence_L", "convergence_Lz", "identities")]
    conv_files = [p for p in conv_files if p.exists()]
    if not run_dir.is_dir() or not (series_files or conv_files):
        raise MissingRunError(f"no run output under {run_dir}")
    written = []
    overlay = []
    for path in series_files:
        kappa = float(path.parent.name.split("_", 1)[1])
        header, rows = read_table(path)
        t = table_column(rows, "t")
        pdir = path.parent / "plot"
        pdir.mkdir(exist_ok=True)
        for col in header[1:]:
            dest = pdir / f"{col}.dat"
            np.savetxt(dest, np.column_stack([t, table_column(rows, col)]), header=f"t {col}")
            written.append(dest)
        overlay.extend([kappa] + [row[c] for c in header] for row in rows)
    if series_files:
        dest = run_dir / "overlay_kappa.dat"
        np.savetxt(dest, np.array(overlay, dtype=float), header="kappa " + " ".join(header))
        written.append(dest)
    for path in conv_files:
        header, rows = read_table(path)
        h = table_column(rows, "h")
        for col in header[1:]:
            dest = run_dir / "plot" / f"{path.stem}_{col}.dat"
            dest.parent.mkdir(exist_ok=True)
            np.savetxt(dest, np.column_stack([h, table_column(rows, col)]), header=f"h {col}")
            written.append(dest)
    return written


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="python3 -m axiboussinesq.cli", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=False):
        sp.add_argument("--config", type=Path, help="experiment configuration file")
        sp.add_argument("--out", type=Path, required=out_required, help="output directory")
        sp.add_argument("--kappa", type=float, help="run this single kappa instead of the sweep")
        sp.add_argument("--seed", type=int, help="seed for random test fields")

    common(sub.add_parser("run", help="time evolution with monitors"))
    v = sub.add_parser("verify", help="operator and harness checks, no time stepping")
    common(v)
    v.add_argument("--mutate", action="store_true", help="inject a stencil bug")
    common(sub.add_parser("convergence", help="refinement studies to CSV"))
    pd = sub.add_parser("plotdata", help="plot-ready text files from a run directory")
    pd.add_argument("run_dir", type=Path, nargs="?")
    pd.add_argument("--out", type=Path)
    return p


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    if getattr(args, "kappa", None) is not None:
        cfg.physics.kappa = args.kappa
        cfg.physics.kappa_sweep = []
    if getattr(args, "seed", None) is not None:
        cfg.init.seed = args.seed
    return validate(cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "plotdata":
            target = args.run_dir or args.out
            if target is None:
                print("plotdata needs a run directory", file=sys.stderr)
                return EXIT_ERROR
            files = cmd_plotdata(target)
            print(f"wrote {len(files)} files")
            return EXIT_OK
        cfg = _load(args)
        if args.command == "run":
            return cmd_run(cfg, args.out or Path(cfg.output.directory))
        if args.command == "verify":
            return cmd_verify(cfg, args.out, cfg.init.seed, args.mutate)
        if args.command == "convergence":
            cmd_convergence(args.out or Path(cfg.output.directory))
            return EXIT_OK
    except AxiBQError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
