"""Experiment configuration: a small sectioned ``key = value`` format.

Grammar, one statement per line::

    # comment
    [section]
    key = value
    section.key = value        # dotted form, usable anywhere

Values are numbers, ``true``/``false``, double-quoted strings, bare words,
or bracketed comma-separated lists of those.  Unknown sections or keys are
errors, as are values of the wrong type; every error carries the line and
column where it was found.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field

from .errors import ConfigError

DEFAULT_SWEEP = (0.0, 0.1, 0.5, 0.9, 1.0, 2.0)
RHO_PRESETS = ("gaussian", "zero")
ZETA_PRESETS = ("vortex_ring", "zero", "gaussian", "half_rho")
CHECK_NAMES = ("max_principle", "energy", "zeta_monotone", "zeta_envelope", "gamma_energy",
               "gamma1_energy", "hls")


@dataclass
class GridConfig:
    nr: int = 128
    nz: int = 256
    rmax: float = 4.0
    zmin: float = -4.0
    zmax: float = 4.0
    z_bc: str = "dirichlet"


@dataclass
class PhysicsConfig:
    kappa: float = 0.0
    kappa_sweep: list = field(default_factory=lambda: list(DEFAULT_SWEEP))


@dataclass
class TimeConfig:
    dt: float = 0.01
    t_end: float = 1.0
    cadence: int = 1
    cfl_max: float = 0.4
    scheme: str = "upwind2"
    adaptive_dt: bool = True


@dataclass
class InitConfig:
    rho: str = "gaussian"
    zeta: str = "vortex_ring"
    rho_amp: float = 1.0
    rho_width: float = 1.0
    zeta_amp: float = 1.0
    zeta_r0: float = 1.0
    zeta_sigma: float = 0.5
    seed: int = 0


@dataclass
class MonitorConfig:
    enabled: list = field(default_factory=lambda: list(CHECK_NAMES))
    besov: bool = True


@dataclass
class OutputConfig:
    directory: str = "runs"
    checkpoint_every: int = 0


@dataclass
class ExperimentConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    init: InitConfig = field(default_factory=InitConfig)
    monitors: MonitorConfig = field(default_factory=MonitorConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def kappas(self) -> list[float]:
        return list(self.physics.kappa_sweep) or [self.physics.kappa]


SECTIONS = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


# ---------------------------------------------------------------------------
# parsing

_KEY = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)?")
_NUMBER = re.compile(r"[+-]?(\d+\.?\d*([eE][+-]?\d+)?|\.\d+([eE][+-]?\d+)?|inf|nan)$")
_WORD = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*$")


def _strip_comment(line: str) -> str:
    out, quoted = [], False
    for ch in line:
        if ch == '"':
            quoted = not quoted
        if ch == "#" and not quoted:
            break
        out.append(ch)
    return "".join(out)


def _scalar(tok: str, lineno: int, col: int):
    if tok.startswith('"'):
        if len(tok) < 2 or not tok.endswith('"'):
            raise ConfigError("unterminated string", lineno, col)
        return tok[1:-1]
    if tok in ("true", "false"):
        return tok == "true"
    if _NUMBER.match(tok):
        if re.fullmatch(r"[+-]?\d+", tok):
            return int(tok)
        return float(tok)
    if _WORD.match(tok):
        return tok
    raise ConfigError(f"cannot read value {tok!r}", lineno, col)


def _value(text: str, lineno: int, col: int):
    s = text.strip()
    col += len(text) - len(text.lstrip())
    if not s:
        raise ConfigError("missing value", lineno, col)
    if s.startswith("["):
        if not s.endswith("]"):
            raise ConfigError("unterminated list", lineno, col)
        inner = s[1:-1]
        if not inner.strip():
            return []
        items, pos = [], col + 1
        for part in inner.split(","):
            if not part.strip():
                raise ConfigError("empty list item", lineno, pos)
            items.append(_scalar(part.strip(), lineno, pos + len(part) - len(part.lstrip())))
            pos += len(part) + 1
        return items
    return _scalar(s, lineno, col)


def _coerce(section: str, key: str, value, default, lineno: int, col: int):
    full = f"{section}.{key}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{full} expects true or false", lineno, col, full)
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{full} expects an integer", lineno, col, full)
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{full} expects a number", lineno, col, full)
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{full} expects a string", lineno, col, full)
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            value = [value]
        return value
    raise ConfigError(f"unsupported key {full}", lineno, col, full)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate; missing keys take their defaults."""
    cfg = ExperimentConfig()
    section = None
    where: dict[str, tuple[int, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line.strip():
            continue
        col = len(line) - len(line.lstrip()) + 1
        s = line.strip()
        if s.startswith("["):
            if not s.endswith("]"):
                raise ConfigError("unterminated section header", lineno, col)
            name = s[1:-1].strip()
            if name not in SECTIONS:
                raise ConfigError(f"unknown section [{name}]", lineno, col + 1, name)
            section = name
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno, col)
        lhs, rhs = line.split("=", 1)
        key = lhs.strip()
        if not _KEY.fullmatch(key):
            raise ConfigError(f"bad key {key!r}", lineno, col)
        if "." in key:
            sec, key = key.split(".", 1)
        elif section is None:
            raise ConfigError(f"key {key!r} outside any section", lineno, col, key)
        else:
            sec = section
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section {sec!r}", lineno, col, sec)
        target = getattr(cfg, sec)
        names = {f.name for f in dataclasses.fields(target)}
        if key not in names:
            raise ConfigError(f"unknown key {sec}.{key}", lineno, col, f"{sec}.{key}")
        vcol = len(lhs) + 2
        value = _value(rhs, lineno, vcol)
        setattr(target, key, _coerce(sec, key, value, getattr(target, key), lineno, vcol))
        where[f"{sec}.{key}"] = (lineno, vcol)
    validate(cfg, where)
    return cfg


def validate(cfg: ExperimentConfig, where: dict | None = None) -> ExperimentConfig:
    """Range and vocabulary checks; ``where`` maps dotted keys to the
    ``(line, column)`` they were read from, for error messages."""
    where = where or {}

    def bad(key, msg):
        line, col = where.get(key, (None, None))
        raise ConfigError(f"{key}: {msg}", line, col, key)

    g = cfg.grid
    if g.rmax <= 0:
        bad("grid.rmax", "must be positive")
    if g.zmin >= g.zmax:
        bad("grid.zmin", "must be below grid.zmax")
    if g.z_bc not in ("dirichlet", "periodic"):
        bad("grid.z_bc", "must be dirichlet or periodic")
    for k in [cfg.physics.kappa, *cfg.physics.kappa_sweep]:
        if not isinstance(k, (int, float)) or isinstance(k, bool) or not k >= 0 or math.isinf(k):
            bad("physics.kappa" if k == cfg.physics.kappa else "physics.kappa_sweep",
                f"kappa values must be finite and >= 0, got {k}")
    cfg.physics.kappa_sweep = [float(k) for k in cfg.physics.kappa_sweep]
    t = cfg.time
    if not t.dt > 0:
        bad("time.dt", "must be positive")
    if not t.t_end >= 0:
        bad("time.t_end", "must be non-negative")
    if t.cadence < 1:
        bad("time.cadence", "must be >= 1")
    if not 0 < t.cfl_max <= 1:
        bad("time.cfl_max", "must lie in (0, 1]")
    if t.scheme not in ("upwind2", "centered_rk2"):
        bad("time.scheme", "must be upwind2 or centered_rk2")
    if cfg.init.rho not in RHO_PRESETS:
        bad("init.rho", f"unknown preset {cfg.init.rho!r}")
    if cfg.init.zeta not in ZETA_PRESETS:
        bad("init.zeta", f"unknown preset {cfg.init.zeta!r}")
    for name in cfg.monitors.enabled:
        if name not in CHECK_NAMES:
            bad("monitors.enabled", f"unknown check {name!r}")
    if cfg.output.checkpoint_every < 0:
        bad("output.checkpoint_every", "must be >= 0")
    return cfg


# ---------------------------------------------------------------------------
# writing

def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return '"' + v + '"'
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    raise TypeError(type(v))


def serialize_config(cfg: ExperimentConfig) -> str:
    out = []
    for sec in SECTIONS:
        out.append(f"[{sec}]")
        obj = getattr(cfg, sec)
        for f in dataclasses.fields(obj):
            out.append(f"{f.name} = {_fmt(getattr(obj, f.name))}")
        out.append("")
    return "\n".join(out)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())
