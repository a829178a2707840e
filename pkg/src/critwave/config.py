"""Run configuration as flat ``dotted.key = value`` text.

Floats are written with repr, so dump followed by parse gives back an
identical RunConfig.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .nonlinearity import Variant

SUITES = ("nonlinearity", "energy", "support", "ledger", "annulus", "hyperboloid",
          "small_data", "conformal", "scatter", "sign")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    variant: str = "massless"
    data_family: str = "bump"
    data_amplitude: float = 1.0
    data_r0: float = 1.0
    grid_R_max: float = 24.0
    grid_dr: float = 1.0 / 128
    integrator_cfl: float = 0.5
    integrator_record_cadence: float = 0.5
    t_final: float = 20.0
    conformal_T_cap: float = 1.0 / 3.0
    conformal_d: float = 3.0
    conformal_t_trust: float = 12.0
    conformal_T_end: float = 1.0 / 48.0
    conformal_agree_tol: float = 0.05
    scatter_T_star: tuple = ()
    verify_energy_tol: float = 2e-5
    output_dir: str = "out"
    verify_suites: tuple = ()

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                object.__setattr__(self, f.name, tuple(v))
        self.validate()

    def validate(self):
        try:
            Variant.parse(self.variant)
        except (KeyError, ValueError) as e:
            raise ConfigError(f"variant: {e}") from None
        if self.data_family not in ("bump", "gaussian_truncated"):
            raise ConfigError(f"data.family must be bump or gaussian_truncated, got {self.data_family!r}")
        if not (math.isfinite(self.data_amplitude) and self.data_amplitude >= 0):
            raise ConfigError("data.amplitude must be finite and >= 0")
        positive = ("data_r0", "grid_R_max", "grid_dr", "integrator_cfl",
                    "integrator_record_cadence", "t_final", "conformal_T_cap", "conformal_d",
                    "conformal_t_trust", "conformal_T_end", "conformal_agree_tol",
                    "verify_energy_tol")
        for name in positive:
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{_key(name)} must be positive and finite, got {v!r}")
        if self.conformal_d <= 1.0 / (2.0 * self.conformal_T_cap):
            raise ConfigError("conformal.d must exceed 1/(2 conformal.T_cap)")
        if self.integrator_cfl > 0.9:
            raise ConfigError("integrator.cfl must be <= 0.9")
        need = self.support + self.t_final + 2 * self.grid_dr
        if self.grid_R_max < need - 1e-12:
            raise ConfigError(f"grid.R_max = {self.grid_R_max} < r0 + t_final + 2 dr = {need}")
        if any(not (0 < t <= self.t_final) for t in self.scatter_T_star):
            raise ConfigError("scatter.T_star values must lie in (0, t_final]")
        step = self.integrator_cfl * self.grid_dr
        cad = max(1, round(self.integrator_record_cadence / step)) * step
        for t in self.scatter_T_star:
            k = round(t / cad)
            if abs(k * cad - t) > step and abs(t - self.t_final) > step:
                raise ConfigError(f"scatter.T_star = {t} is not a snapshot time "
                                  f"(multiples of {cad:g}, or t_final)")
        bad = [s for s in self.verify_suites if s not in SUITES]
        if bad:
            raise ConfigError(f"unknown verify suites {bad}; choose from {', '.join(SUITES)}")

    @property
    def support(self) -> float:
        return 6.0 * self.data_r0 if self.data_family == "gaussian_truncated" else self.data_r0

    def with_values(self, **kw) -> "RunConfig":
        return replace(self, **kw)


def _key(name: str) -> str:
    return name if name == "t_final" else name.replace("_", ".", 1)


_FIELDS = {_key(f.name): f for f in fields(RunConfig)}


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(f, text: str):
    default = f.default
    if isinstance(default, tuple):
        items = [s.strip() for s in text.split(",") if s.strip()]
        if f.name == "scatter_T_star":
            return tuple(float(s) for s in items)
        return tuple(items)
    if isinstance(default, float):
        return float(text)
    return text


def dumps(cfg: RunConfig) -> str:
    return "".join(f"{_key(f.name)} = {_fmt(getattr(cfg, f.name))}\n" for f in fields(cfg))


def loads(text: str) -> RunConfig:
    vals = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        if k not in _FIELDS:
            raise ConfigError(f"line {n}: unknown key {k!r}")
        if _FIELDS[k].name in vals:
            raise ConfigError(f"line {n}: duplicate key {k!r}")
        try:
            vals[_FIELDS[k].name] = _convert(_FIELDS[k], v)
        except ValueError as e:
            raise ConfigError(f"line {n}: {k}: {e}") from None
    return RunConfig(**vals)


def load(path) -> RunConfig:
    return loads(Path(path).read_text())


def dump(cfg: RunConfig, path):
    Path(path).write_text(dumps(cfg))


def override(cfg: RunConfig, key: str, text: str) -> RunConfig:
    """Apply one ``dotted.key`` override given as text."""
    if key not in _FIELDS:
        raise ConfigError(f"unknown key {key!r}")
    f = _FIELDS[key]
    try:
        return replace(cfg, **{f.name: _convert(f, text)})
    except ValueError as e:
        raise ConfigError(f"{key}: {e}") from None
