"""Run configuration: TOML files with nested sections, validated on load.

Unknown sections or keys are rejected. ``section.key=value`` overrides are
applied on top of a file or preset, and the resolved configuration is
written next to every run's outputs.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .model import ModelConfig

__all__ = ["ConfigError", "RunConfig", "load_config", "load_preset", "list_presets", "parse_override"]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class ScanSection:
    omega_sq_min: float = 0.0
    omega_sq_max: float = 0.8
    n_points: int = 161
    n_states: int = 15
    parity: str = "even"
    max_refine_levels: int = 12


@dataclass(frozen=True)
class QuenchSection:
    omega_i_sq: float = 0.8
    omega_f_sq: float = 0.58
    t_final: float = 300.0
    dt_sample: float = 0.1
    targets: list = field(default_factory=list)
    n_targets: int = 6
    n_keep: int = 0
    defect_tol: float = 1e-8


@dataclass(frozen=True)
class ResponseSection:
    omega_f_min: float = 0.0
    omega_f_max: float = 0.8
    n_points: int = 100
    refine_near_crossings: bool = True
    measure: str = "L"


@dataclass(frozen=True)
class MultiwellSection:
    omega_i_sq_list: list = field(default_factory=lambda: [0.56])
    omega_f_sq: float = 0.0
    core_sites: int = 3
    density_every: float = 10.0


@dataclass(frozen=True)
class RunSection:
    output_dir: str = "output"
    threads: int = 1
    log_level: str = "WARNING"


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    scan: ScanSection = field(default_factory=ScanSection)
    quench: QuenchSection = field(default_factory=QuenchSection)
    response: ResponseSection = field(default_factory=ResponseSection)
    multiwell: MultiwellSection = field(default_factory=MultiwellSection)
    run: RunSection = field(default_factory=RunSection)

    def to_dict(self) -> dict:
        return {f.name: asdict(getattr(self, f.name)) for f in fields(self)}

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    def validate(self) -> "RunConfig":
        m, s, q, r, w = self.model, self.scan, self.quench, self.response, self.multiwell
        _check(m.n_particles >= 1, "model.n_particles", "must be at least 1")
        _check(m.n_sites >= 1 and m.n_sites % 2 == 1, "model.n_sites", "must be a positive odd integer")
        _check(m.v0 >= 0, "model.v0", "must be non-negative")
        _check(m.g >= 0, "model.g", "must be non-negative")
        _check(m.n_grid >= 2, "model.n_grid", "must be at least 2")
        _check(m.n_bands >= 1, "model.n_bands", "must be at least 1")
        _check(m.wannier_omega_sq >= 0, "model.wannier_omega_sq", "must be non-negative")
        _check(s.n_points >= 1, "scan.n_points", "must be positive")
        _check(s.omega_sq_max > s.omega_sq_min >= 0, "scan.omega_sq_max",
               "empty omega_sq range (need 0 <= omega_sq_min < omega_sq_max)")
        _check(s.n_states >= 2, "scan.n_states", "must be at least 2")
        _check(s.parity in ("even", "odd"), "scan.parity", "must be 'even' or 'odd'")
        _check(1 <= s.max_refine_levels <= 40, "scan.max_refine_levels", "must be in [1, 40]")
        _check(q.omega_i_sq >= 0 and q.omega_f_sq >= 0, "quench.omega_f_sq", "must be non-negative")
        _check(q.omega_f_sq <= q.omega_i_sq, "quench.omega_f_sq", "must not exceed quench.omega_i_sq")
        _check(q.t_final > 0, "quench.t_final", "must be positive")
        _check(0 < q.dt_sample <= q.t_final, "quench.dt_sample", "must be positive and not exceed t_final")
        _check(q.n_keep >= 0, "quench.n_keep", "must be >= 0 (0 selects the default)")
        _check(q.defect_tol > 0, "quench.defect_tol", "must be positive")
        _check(r.omega_f_max > r.omega_f_min >= 0, "response.omega_f_max", "empty omega_f range")
        _check(r.n_points >= 2, "response.n_points", "must be at least 2")
        _check(r.measure in ("L", "core"), "response.measure", "must be 'L' or 'core'")
        _check(len(w.omega_i_sq_list) >= 1, "multiwell.omega_i_sq_list", "must not be empty")
        _check(all(v >= w.omega_f_sq for v in w.omega_i_sq_list), "multiwell.omega_i_sq_list",
               "every entry must be >= multiwell.omega_f_sq")
        _check(w.core_sites >= 1 and w.core_sites % 2 == 1 and w.core_sites <= m.n_sites,
               "multiwell.core_sites", "must be odd and at most model.n_sites")
        _check(w.density_every > 0, "multiwell.density_every", "must be positive")
        _check(self.run.threads >= 1, "run.threads", "must be at least 1")
        return self


def _check(ok, key, msg):
    if not ok:
        raise ConfigError(f"{key}: {msg}")


_CLASSES = {"model": ModelConfig, "scan": ScanSection, "quench": QuenchSection,
            "response": ResponseSection, "multiwell": MultiwellSection, "run": RunSection}


def _coerce(section: str, key: str, value, default):
    where = f"{section}.{key}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        return list(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    return value


def _merge(cfg: RunConfig, data: dict) -> RunConfig:
    for section, values in data.items():
        if section not in _CLASSES:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(values, dict):
            raise ConfigError(f"[{section}] must be a table")
        current = getattr(cfg, section)
        known = {f.name for f in fields(current)}
        updates = {}
        for key, value in values.items():
            if key not in known:
                raise ConfigError(f"{section}.{key}: unknown key")
            updates[key] = _coerce(section, key, value, getattr(current, key))
        cfg = replace(cfg, **{section: replace(current, **updates)})
    return cfg


def parse_override(text: str) -> dict:
    """``section.key=value`` with a TOML value (bare words are taken as strings)."""
    if "=" not in text or "." not in text.split("=", 1)[0]:
        raise ConfigError(f"override {text!r} must look like section.key=value")
    path, raw = text.split("=", 1)
    section, key = path.strip().split(".", 1)
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return {section: {key: value}}


def _read(text: str, origin: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{origin}: {exc}") from exc


def list_presets() -> list[str]:
    root = resources.files("latticequench") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def _preset_text(name: str) -> str:
    res = resources.files("latticequench") / "presets" / f"{name}.toml"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(list_presets())}")
    return res.read_text()


def load_preset(name: str, overrides=()) -> RunConfig:
    return load_config(None, overrides, preset=name)


def load_config(path: str | Path | None = None, overrides=(), preset: str | None = None) -> RunConfig:
    """Defaults, then preset, then file, then overrides; validated."""
    cfg = RunConfig()
    if preset:
        cfg = _merge(cfg, _read(_preset_text(preset), f"preset {preset}"))
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {p} not found")
        cfg = _merge(cfg, _read(p.read_text(), str(p)))
    for ov in overrides:
        cfg = _merge(cfg, ov if isinstance(ov, dict) else parse_override(ov))
    return cfg.validate()
