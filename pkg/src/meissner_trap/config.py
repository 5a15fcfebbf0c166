"""Sectioned ``key = value`` run configuration.

Every physical key carries its unit as a suffix (``_m``, ``_a``, ``_hz``,
``_t``, ...). Values may be plain numbers in that unit or carry an SI
prefix and the unit symbol, e.g. ``separation_m = 1.2mm`` or
``bz_t = 3 mT``. Unknown sections or keys are rejected; missing keys take
the defaults below.
"""

from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path

from .magnetics import CoreState

PREFIXES = {"p": 1e-12, "n": 1e-9, "u": 1e-6, "µ": 1e-6, "m": 1e-3, "": 1.0, "k": 1e3,
            "M": 1e6, "G": 1e9}

# key suffix -> unit symbol accepted in values
SUFFIX_UNITS = {
    "_m": "m", "_a": "A", "_hz": "Hz", "_t": "T", "_s": "s",
    "_kg_per_m3": None, "_m_per_s2": None, "_hz_per_t": None,
}
UNITLESS = {"state", "n_sheet", "contrast", "grid_points", "noise_rms", "seed", "directory",
            "current_count", "psd_segment", "psd_overlap"}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([a-zA-Zµ]*)\s*$")


class ConfigError(ValueError):
    pass


def parse_quantity(text: str, unit: str | None) -> float:
    """Parse ``'173.5mT'`` (unit ``'T'``) to ``0.1735``; bare numbers pass through."""
    m = _QUANTITY.match(str(text))
    if not m:
        raise ConfigError(f"cannot parse quantity {text!r}")
    value, sym = float(m.group(1)), m.group(2)
    if not sym:
        return value
    if unit is None or not sym.endswith(unit) or sym[: len(sym) - len(unit)] not in PREFIXES:
        raise ConfigError(f"unit {sym!r} in {text!r} does not match expected {unit!r}")
    return value * PREFIXES[sym[: len(sym) - len(unit)]]


def _unit_for(key: str) -> str | None:
    for suffix in sorted(SUFFIX_UNITS, key=len, reverse=True):
        if key.endswith(suffix):
            return SUFFIX_UNITS[suffix]
    raise ConfigError(f"key {key!r} has no unit suffix")


@dataclass(frozen=True)
class CoilSection:
    current_top_a: float = 1.0
    current_bottom_a: float = 1.0
    state: str = CoreState.SUPERCONDUCTING.value
    slit_width_m: float = 0.2e-3
    n_sheet: int = 16


@dataclass(frozen=True)
class TrapSection:
    separation_m: float = 1.2e-3
    gravity_m_per_s2: float = 9.81
    sweep_gravity_m_per_s2: float = 0.0


@dataclass(frozen=True)
class ParticleSection:
    radius_m: float = 25e-6
    density_kg_per_m3: float = 8400.0


@dataclass(frozen=True)
class NvSection:
    zfs_hz: float = 2.877e9
    gamma_hz_per_t: float = 2.8e10
    linewidth_hz: float = 8e6
    contrast: float = 0.10
    grid_start_hz: float = 2.5e9
    grid_stop_hz: float = 3.25e9
    grid_points: int = 1501
    noise_rms: float = 0.0
    bx_t: float = 0.0
    by_t: float = 0.0
    bz_t: float = 0.0
    height_m: float = 0.5e-3
    current_start_a: float = 0.0
    current_stop_a: float = 0.5
    current_count: int = 11


@dataclass(frozen=True)
class AnalysisSection:
    seed: int = 0
    f0_hz: float = 20.0
    tau_s: float = 10.0
    drive_duration_s: float = 2.0
    record_duration_s: float = 30.0
    sample_rate_hz: float = 300.0
    noise_rms_m: float = 0.0
    amplitude_m: float = 1e-6
    pixel_size_m: float = 0.25e-6
    psd_segment: int = 2048
    psd_overlap: float = 0.5


@dataclass(frozen=True)
class OutputSection:
    directory: str = "."


@dataclass(frozen=True)
class Config:
    coil: CoilSection = field(default_factory=CoilSection)
    trap: TrapSection = field(default_factory=TrapSection)
    particle: ParticleSection = field(default_factory=ParticleSection)
    nv: NvSection = field(default_factory=NvSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    output: OutputSection = field(default_factory=OutputSection)

    def replace(self, section: str, **kwargs) -> "Config":
        return dataclasses.replace(self, **{section: dataclasses.replace(getattr(self, section),
                                                                         **kwargs)})


def _convert(section: str, f: dataclasses.Field, raw: str):
    try:
        if f.type in ("float", float):
            unit = None if f.name in UNITLESS else _unit_for(f.name)
            return parse_quantity(raw, unit)
        if f.type in ("int", int):
            return int(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"[{section}] {f.name}: {exc}") from None


def _validate(cfg: Config) -> None:
    try:
        CoreState(cfg.coil.state)
    except ValueError:
        raise ConfigError(f"[coil] state must be one of {[s.value for s in CoreState]}") from None
    checks = [
        ("trap", "separation_m", cfg.trap.separation_m > 0),
        ("particle", "radius_m", cfg.particle.radius_m > 0),
        ("particle", "density_kg_per_m3", cfg.particle.density_kg_per_m3 > 0),
        ("coil", "n_sheet", cfg.coil.n_sheet >= 1),
        ("coil", "slit_width_m", cfg.coil.slit_width_m >= 0),
        ("nv", "linewidth_hz", cfg.nv.linewidth_hz > 0),
        ("nv", "contrast", 0 < cfg.nv.contrast < 1),
        ("nv", "grid_points", cfg.nv.grid_points >= 16),
        ("nv", "grid_stop_hz", cfg.nv.grid_stop_hz > cfg.nv.grid_start_hz),
        ("nv", "noise_rms", cfg.nv.noise_rms >= 0),
        ("nv", "current_count", cfg.nv.current_count >= 2),
        ("analysis", "sample_rate_hz", cfg.analysis.sample_rate_hz > 0),
        ("analysis", "tau_s", cfg.analysis.tau_s > 0),
        ("analysis", "f0_hz", cfg.analysis.f0_hz > 0),
        ("analysis", "noise_rms_m", cfg.analysis.noise_rms_m >= 0),
        ("analysis", "psd_overlap", 0 <= cfg.analysis.psd_overlap <= 0.9),
    ]
    for section, key, ok in checks:
        if not ok:
            raise ConfigError(f"[{section}] {key}: value out of range")


def parse_config(text: str) -> Config:
    """Parse INI text into a validated :class:`Config`."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0]) from None
    sections = {f.name: f for f in dataclasses.fields(Config)}
    built = {}
    for name in parser.sections():
        if name not in sections:
            raise ConfigError(f"unknown section [{name}]")
        cls = sections[name].default_factory
        known = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in parser.items(name):
            if key not in known:
                raise ConfigError(f"[{name}] unknown key {key!r}")
            kwargs[key] = _convert(name, known[key], raw)
        built[name] = cls(**kwargs)
    cfg = Config(**built)
    _validate(cfg)
    return cfg


def load_config(path) -> Config:
    """Read a config file; ``None`` gives the defaults."""
    if path is None:
        return Config()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


def dump_config(cfg: Config) -> str:
    """INI text that round-trips through :func:`parse_config`."""
    out = []
    for sec in dataclasses.fields(cfg):
        out.append(f"[{sec.name}]")
        for f in dataclasses.fields(getattr(cfg, sec.name)):
            v = getattr(getattr(cfg, sec.name), f.name)
            out.append(f"{f.name} = {v!r}" if isinstance(v, float) else f"{f.name} = {v}")
        out.append("")
    return "\n".join(out)
