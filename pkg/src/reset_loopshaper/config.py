"""Workbench configuration: INI-style files with one section per loop block.

Corner-frequency keys are rad/s (matching how controller parameters are
usually quoted); analysis frequency *ranges* are Hz. Unknown sections or
keys are rejected so typos fail loudly. ``parse -> serialize -> parse`` is
the identity on every field.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, asdict


class ConfigError(ValueError):
    """Invalid or inconsistent workbench configuration."""


_SPIDER_STAGE = ((6.615e5,), (5.837e5, 279.4, 83.57))

ASSEMBLY_KINDS = ("pid", "pi2d", "pci_pid", "cglp_pid")


@dataclass(frozen=True)
class ResetSettings:
    gamma: float
    k_r: float
    omega_r: float
    omega_dr: float | None = None   # CgLp lead zero, rad/s
    omega_tr: float | None = None   # CgLp lead pole, rad/s


@dataclass(frozen=True)
class ShapingSettings:
    omega_zeta: float
    omega_eta: float
    omega_psi: float


@dataclass(frozen=True)
class PlantSettings:
    preset: str | None = None               # e.g. "spider_stage"
    num: tuple[float, ...] | None = None    # ascending coefficients
    den: tuple[float, ...] | None = None

    def coefficients(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        if self.preset is not None:
            if self.preset != "spider_stage":
                raise ConfigError(f"unknown plant preset {self.preset!r}")
            return _SPIDER_STAGE
        if self.num is None or self.den is None:
            raise ConfigError("plant needs either a preset or num/den coefficients")
        return self.num, self.den


@dataclass(frozen=True)
class AnalysisSettings:
    f_min_hz: float = 1.0
    f_max_hz: float = 1000.0
    points_per_decade: int = 200
    sigma: float = 0.1
    delta_n: float = 1.5


@dataclass(frozen=True)
class SimulationSettings:
    sample_step: float = 1e-5
    duration: float = 1.0
    quantizer: float = 0.0     # measurement resolution in plant units; 0 = off
    saturation: float = 0.0    # symmetric actuator clamp; 0 = off
    store_every: int = 1
    seed: int = 0


@dataclass(frozen=True)
class WorkbenchConfig:
    kind: str
    pid: dict
    reset: ResetSettings | None
    shaping: ShapingSettings | None
    plant: PlantSettings
    analysis: AnalysisSettings = field(default_factory=AnalysisSettings)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)

    def __post_init__(self):
        if self.kind not in ASSEMBLY_KINDS:
            raise ConfigError(f"unknown assembly kind {self.kind!r}")
        if self.kind in ("pci_pid", "cglp_pid") and self.reset is None:
            raise ConfigError(f"assembly kind {self.kind!r} needs a [reset] section")
        if self.kind in ("pid", "pi2d") and self.reset is not None:
            raise ConfigError(f"assembly kind {self.kind!r} takes no [reset] section")
        if self.kind == "cglp_pid":
            if self.reset.omega_dr is None or self.reset.omega_tr is None:
                raise ConfigError("cglp_pid needs omega_dr and omega_tr")
        required = {"k_p", "omega_i", "omega_d", "omega_t", "omega_f"}
        if set(self.pid) != required:
            raise ConfigError(f"[pid] must define exactly {sorted(required)}")


_PID_KEYS = ("k_p", "omega_i", "omega_d", "omega_t", "omega_f")
_RESET_KEYS = ("gamma", "k_r", "omega_r", "omega_dr", "omega_tr")
_SHAPING_KEYS = ("omega_zeta", "omega_eta", "omega_psi")
_PLANT_KEYS = ("preset", "num", "den")
_ANALYSIS_KEYS = ("f_min_hz", "f_max_hz", "points_per_decade", "sigma", "delta_n")
_SIM_KEYS = ("sample_step", "duration", "quantizer", "saturation", "store_every", "seed")
_SECTIONS = {
    "assembly": ("kind",),
    "pid": _PID_KEYS,
    "reset": _RESET_KEYS,
    "shaping": _SHAPING_KEYS,
    "plant": _PLANT_KEYS,
    "analysis": _ANALYSIS_KEYS,
    "simulation": _SIM_KEYS,
}


def _check_keys(parser: configparser.ConfigParser) -> None:
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        allowed = set(_SECTIONS[section])
        for key in parser[section]:
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.split(","))


def parse_config(text: str) -> WorkbenchConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    _check_keys(parser)
    if "assembly" not in parser or "kind" not in parser["assembly"]:
        raise ConfigError("missing [assembly] kind")
    kind = parser["assembly"]["kind"].strip()

    if "pid" not in parser:
        raise ConfigError("missing [pid] section")
    try:
        pid = {k: float(parser["pid"][k]) for k in parser["pid"]}
    except ValueError as exc:
        raise ConfigError(f"bad [pid] value: {exc}") from exc

    reset = None
    if "reset" in parser:
        sec = parser["reset"]
        try:
            reset = ResetSettings(
                gamma=float(sec["gamma"]), k_r=float(sec["k_r"]),
                omega_r=float(sec["omega_r"]),
                omega_dr=float(sec["omega_dr"]) if "omega_dr" in sec else None,
                omega_tr=float(sec["omega_tr"]) if "omega_tr" in sec else None)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad [reset] section: {exc}") from exc

    shaping = None
    if "shaping" in parser:
        sec = parser["shaping"]
        try:
            shaping = ShapingSettings(
                omega_zeta=float(sec["omega_zeta"]), omega_eta=float(sec["omega_eta"]),
                omega_psi=float(sec["omega_psi"]))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad [shaping] section: {exc}") from exc

    if "plant" not in parser:
        raise ConfigError("missing [plant] section")
    sec = parser["plant"]
    try:
        plant = PlantSettings(
            preset=sec["preset"].strip() if "preset" in sec else None,
            num=_floats(sec["num"]) if "num" in sec else None,
            den=_floats(sec["den"]) if "den" in sec else None)
    except ValueError as exc:
        raise ConfigError(f"bad [plant] section: {exc}") from exc
    plant.coefficients()  # validate now

    analysis = AnalysisSettings()
    if "analysis" in parser:
        sec = parser["analysis"]
        try:
            analysis = AnalysisSettings(
                f_min_hz=float(sec.get("f_min_hz", analysis.f_min_hz)),
                f_max_hz=float(sec.get("f_max_hz", analysis.f_max_hz)),
                points_per_decade=int(sec.get("points_per_decade",
                                              analysis.points_per_decade)),
                sigma=float(sec.get("sigma", analysis.sigma)),
                delta_n=float(sec.get("delta_n", analysis.delta_n)))
        except ValueError as exc:
            raise ConfigError(f"bad [analysis] section: {exc}") from exc

    simulation = SimulationSettings()
    if "simulation" in parser:
        sec = parser["simulation"]
        try:
            simulation = SimulationSettings(
                sample_step=float(sec.get("sample_step", simulation.sample_step)),
                duration=float(sec.get("duration", simulation.duration)),
                quantizer=float(sec.get("quantizer", simulation.quantizer)),
                saturation=float(sec.get("saturation", simulation.saturation)),
                store_every=int(sec.get("store_every", simulation.store_every)),
                seed=int(sec.get("seed", simulation.seed)))
        except ValueError as exc:
            raise ConfigError(f"bad [simulation] section: {exc}") from exc

    try:
        return WorkbenchConfig(kind=kind, pid=pid, reset=reset, shaping=shaping,
                               plant=plant, analysis=analysis, simulation=simulation)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> WorkbenchConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _fmt(value: float) -> str:
    return repr(float(value))


def serialize_config(cfg: WorkbenchConfig) -> str:
    parser = configparser.ConfigParser()
    parser["assembly"] = {"kind": cfg.kind}
    parser["pid"] = {k: _fmt(cfg.pid[k]) for k in _PID_KEYS}
    if cfg.reset is not None:
        sec = {"gamma": _fmt(cfg.reset.gamma), "k_r": _fmt(cfg.reset.k_r),
               "omega_r": _fmt(cfg.reset.omega_r)}
        if cfg.reset.omega_dr is not None:
            sec["omega_dr"] = _fmt(cfg.reset.omega_dr)
        if cfg.reset.omega_tr is not None:
            sec["omega_tr"] = _fmt(cfg.reset.omega_tr)
        parser["reset"] = sec
    if cfg.shaping is not None:
        parser["shaping"] = {k: _fmt(getattr(cfg.shaping, k)) for k in _SHAPING_KEYS}
    plant = {}
    if cfg.plant.preset is not None:
        plant["preset"] = cfg.plant.preset
    if cfg.plant.num is not None:
        plant["num"] = ", ".join(_fmt(c) for c in cfg.plant.num)
    if cfg.plant.den is not None:
        plant["den"] = ", ".join(_fmt(c) for c in cfg.plant.den)
    parser["plant"] = plant
    parser["analysis"] = {
        "f_min_hz": _fmt(cfg.analysis.f_min_hz),
        "f_max_hz": _fmt(cfg.analysis.f_max_hz),
        "points_per_decade": str(cfg.analysis.points_per_decade),
        "sigma": _fmt(cfg.analysis.sigma),
        "delta_n": _fmt(cfg.analysis.delta_n),
    }
    parser["simulation"] = {
        "sample_step": _fmt(cfg.simulation.sample_step),
        "duration": _fmt(cfg.simulation.duration),
        "quantizer": _fmt(cfg.simulation.quantizer),
        "saturation": _fmt(cfg.simulation.saturation),
        "store_every": str(cfg.simulation.store_every),
        "seed": str(cfg.simulation.seed),
    }
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
