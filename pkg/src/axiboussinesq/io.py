"""Binary checkpoints and CSV tables."""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .cylgrid import EVEN, ODD, GridSpec, ScalarFieldRZ, VelocityRZ, make_grid
from .errors import AxiBQError

MAGIC = b"AXBQ1"
_HEADER = struct.Struct("<IIddddd")

TIMESERIES_COLUMNS = ("t", "l2_rho", "linf_rho", "l3_rho", "l2_v", "h1_v", "l2_zeta",
                      "l2_gamma", "l2_omega", "besov_b31_0_rho")


class CheckpointFormatError(AxiBQError, ValueError):
    pass


def write_checkpoint(path, state) -> Path:
    """Write ``state`` (anything with t, kappa, rho, zeta, v) in the AXBQ1 layout."""
    path = Path(path)
    g = state.rho.grid
    parts = [MAGIC, _HEADER.pack(g.nr, g.nz, g.rmax, g.zmin, g.zmax, state.t, state.kappa)]
    for a in (state.rho.values, state.zeta.values, state.v.vr.values, state.v.vz.values):
        parts.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(b"".join(parts))
    tmp.replace(path)
    return path


def read_checkpoint_raw(path) -> dict:
    data = Path(path).read_bytes()
    if data[:5] != MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic {data[:5]!r}")
    nr, nz, rmax, zmin, zmax, t, kappa = _HEADER.unpack_from(data, 5)
    off = 5 + _HEADER.size
    size = nr * nz * 8
    if len(data) != off + 4 * size:
        raise CheckpointFormatError(f"{path}: expected {off + 4 * size} bytes, found {len(data)}")
    arrays = [np.frombuffer(data, dtype="<f8", count=nr * nz, offset=off + k * size)
              .reshape(nr, nz).astype(float) for k in range(4)]
    return {"nr": nr, "nz": nz, "rmax": rmax, "zmin": zmin, "zmax": zmax, "t": t,
            "kappa": kappa, "rho": arrays[0], "zeta": arrays[1], "vr": arrays[2], "vz": arrays[3]}


def read_checkpoint(path, z_bc: str = "dirichlet"):
    """Rebuild a :class:`~axiboussinesq.evolve.SimState`.

    The file does not store the stream function, so ``v.psi`` is None.
    """
    from .evolve import SimState

    raw = read_checkpoint_raw(path)
    g = make_grid(raw["nr"], raw["nz"], raw["rmax"], raw["zmin"], raw["zmax"], z_bc)
    v = VelocityRZ(ScalarFieldRZ(g, raw["vr"], ODD), ScalarFieldRZ(g, raw["vz"], EVEN))
    return SimState(raw["t"], raw["kappa"], ScalarFieldRZ(g, raw["rho"], EVEN),
                    ScalarFieldRZ(g, raw["zeta"], EVEN), v)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_table(path, columns, rows) -> Path:
    """CSV with a header; ``rows`` are mappings or sequences in column order."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            vals = [row[c] for c in columns] if isinstance(row, dict) else list(row)
            w.writerow([_fmt(v) for v in vals])
    return path


def _parse(s: str):
    try:
        return float(s)
    except ValueError:
        return s


def read_table(path) -> tuple[list[str], list[dict]]:
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [dict(zip(header, map(_parse, line))) for line in r]
    return header, rows


def table_column(rows, name) -> np.ndarray:
    return np.array([row[name] for row in rows], dtype=float)

