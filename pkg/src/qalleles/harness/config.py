"""Run configuration: ``key = value`` files, presets and CLI overrides.

Resolution order (later wins): built-in defaults, preset, config file, CLI.

Keys
----
preset           name from ``qalleles presets``
m                selection expression in x, y
mode             haploid | diploid
r, kappa, epsilon
x_min, x_max, y_min, y_max, nx, ny
ic               bumps ``x0,y0[:w];x1,y1[:w]...``
target_mass      initial mass; default midpoint of the admissible interval
t_max            final time
sample_interval  time between diagnostics rows
snapshot_times   comma-separated times for field snapshots (may be empty)
cfl              step-size factor (default 0.2)
canonical        true | false, integrate the canonical equations alongside
canonical_dt     step of the canonical integrator
ode_t_max        horizon of the canonical integrator in sweeps (default t_max)
mode_threshold   relative threshold for counting marginal modes
seed             sweep RNG seed
sweep_count      number of random starting points
sweep_box        x_lo,x_hi,y_lo,y_hi for sweep starting points
jobs             parallel sweep workers
out              output directory
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from ..engine import Bump, InitialCondition
from ..errors import ConfigError
from ..grid import GridSpec
from .presets import PRESETS

SCHEMA_VERSION = 1


def _float(v: str) -> float:
    try:
        out = float(v)
    except ValueError:
        raise ConfigError(f"not a number: {v!r}") from None
    if not math.isfinite(out):
        raise ConfigError(f"not a finite number: {v!r}")
    return out


def _int(v: str) -> int:
    try:
        return int(v)
    except ValueError:
        raise ConfigError(f"not an integer: {v!r}") from None


def _bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _floats(v: str) -> tuple:
    v = v.strip()
    return tuple(_float(p) for p in v.split(",")) if v else ()


def parse_ic(v: str) -> tuple:
    bumps = []
    for part in v.split(";"):
        part = part.strip()
        if not part:
            continue
        weight = 1.0
        if ":" in part:
            part, w = part.split(":", 1)
            weight = _float(w)
        coords = _floats(part)
        if len(coords) != 2:
            raise ConfigError(f"bump needs 'x,y', got {part!r}")
        try:
            bumps.append(Bump(coords[0], coords[1], weight))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if not bumps:
        raise ConfigError("initial condition has no bumps")
    return tuple(bumps)


def format_ic(bumps) -> str:
    return ";".join(f"{b.x0!r},{b.y0!r}:{b.weight!r}" for b in bumps)


_PARSERS = {
    "preset": str, "m": str, "mode": str, "out": str,
    "r": _float, "kappa": _float, "epsilon": _float,
    "x_min": _float, "x_max": _float, "y_min": _float, "y_max": _float,
    "nx": _int, "ny": _int,
    "ic": parse_ic, "target_mass": _float,
    "t_max": _float, "sample_interval": _float, "snapshot_times": _floats,
    "cfl": _float, "canonical": _bool, "canonical_dt": _float, "ode_t_max": _float,
    "mode_threshold": _float,
    "seed": _int, "sweep_count": _int, "sweep_box": _floats, "jobs": _int,
}


@dataclass(frozen=True)
class RunConfig:
    m: str = "x^2+y^2"
    mode: str = "haploid"
    r: float = 40.0
    kappa: float = 1.0
    epsilon: float = 0.05
    x_min: float = -2.0
    x_max: float = 2.0
    y_min: float = -2.0
    y_max: float = 2.0
    nx: int = 101
    ny: int = 101
    ic: tuple = (Bump(1.0, -0.5),)
    target_mass: Optional[float] = None
    t_max: float = 3.0
    sample_interval: float = 0.05
    snapshot_times: tuple = ()
    cfl: float = 0.2
    canonical: bool = True
    canonical_dt: float = 1e-3
    ode_t_max: Optional[float] = None
    mode_threshold: float = 0.1
    seed: int = 0
    sweep_count: int = 20
    sweep_box: tuple = (-2.0, 2.0, -2.0, 2.0)
    jobs: int = 1
    out: str = "run"
    preset: Optional[str] = None

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.x_min, self.x_max, self.y_min, self.y_max, self.nx, self.ny)

    @property
    def initial_condition(self) -> InitialCondition:
        return InitialCondition(self.ic, self.target_mass)

    def validate(self) -> "RunConfig":
        pos = ("r", "kappa", "epsilon", "t_max", "sample_interval", "cfl", "canonical_dt")
        for k in pos:
            if not getattr(self, k) > 0:
                raise ConfigError(f"{k} must be positive, got {getattr(self, k)}")
        if self.mode not in ("haploid", "diploid"):
            raise ConfigError(f"mode must be haploid or diploid, got {self.mode!r}")
        if not self.m.strip():
            raise ConfigError("empty selection expression")
        try:
            g = self.grid
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.mode == "diploid" and not g.is_square:
            raise ConfigError("diploid mode needs I = J and nx = ny")
        if self.target_mass is not None and not self.target_mass > 0:
            raise ConfigError("target_mass must be positive")
        if any(t < 0 or t > self.t_max for t in self.snapshot_times):
            raise ConfigError("snapshot_times must lie in [0, t_max]")
        if self.ode_t_max is not None and not self.ode_t_max > 0:
            raise ConfigError("ode_t_max must be positive")
        if not 0 < self.mode_threshold < 1:
            raise ConfigError("mode_threshold must lie in (0, 1)")
        if self.sweep_count < 1:
            raise ConfigError("sweep_count must be at least 1")
        if len(self.sweep_box) != 4:
            raise ConfigError("sweep_box needs x_lo,x_hi,y_lo,y_hi")
        xl, xh, yl, yh = self.sweep_box
        if not (xl <= xh and yl <= yh):
            raise ConfigError("sweep_box bounds are not ordered")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        return self

    def to_text(self) -> str:
        """Fully resolved ``key = value`` text; reparses to an identical config."""
        lines = [f"# qalleles resolved configuration, schema {SCHEMA_VERSION}"]
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if f.name == "ic":
                s = format_ic(v)
            elif isinstance(v, bool):
                s = "true" if v else "false"
            elif isinstance(v, tuple):
                s = ",".join(repr(float(t)) for t in v)
            elif isinstance(v, float):
                s = repr(v)
            else:
                s = str(v)
            lines.append(f"{f.name} = {s}")
        return "\n".join(lines) + "\n"


def read_config_file(path: str | Path) -> dict[str, str]:
    raw = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            k, v = (s.strip() for s in line.split("=", 1))
            if k not in _PARSERS:
                raise ConfigError(f"{path}:{lineno}: unknown key {k!r}")
            raw[k] = v
    return raw


def _apply(cfg: RunConfig, raw: dict[str, str]) -> RunConfig:
    updates = {}
    for k, v in raw.items():
        if k not in _PARSERS:
            raise ConfigError(f"unknown key {k!r}")
        updates[k] = _PARSERS[k](v)
    return replace(cfg, **updates)


def resolve(file_values: Optional[dict] = None, cli_values: Optional[dict] = None) -> RunConfig:
    """Merge defaults, preset, file and CLI values (raw strings) into a validated config."""
    file_values = dict(file_values or {})
    cli_values = {k: v for k, v in (cli_values or {}).items() if v is not None}
    preset = cli_values.get("preset", file_values.get("preset"))
    cfg = RunConfig()
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; see 'qalleles presets'")
        cfg = _apply(cfg, PRESETS[preset])
    cfg = _apply(cfg, file_values)
    cfg = _apply(cfg, cli_values)
    return cfg.validate()


def load(path: Optional[str] = None, **cli_values) -> RunConfig:
    return resolve(read_config_file(path) if path else {}, cli_values)
