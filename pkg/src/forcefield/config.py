"""INI-style scenario and pipeline configuration.

Scenario files use these sections (all optional except ``[scenario]``)::

    [scenario]
    seed = 7
    origin = 34.0, -81.0
    speed = 2.0
    lawnmower = 0, 0, 100, 100      ; x_min, y_min, x_max, y_max
    spacing = 10
    ; or: waypoints = 0 0; 0 100; 50 100
    rate_pose = 5
    turn_guard = 0.5

    [noise]
    wind_speed = 0.1
    current = 0.1
    depth = 0.1

    [wind]
    type = uniform                  ; uniform | shear | vortex
    e = 2
    n = 0

    [current]
    type = uniform
    speed = 2.5                     ; speed/bearing may replace e/n
    bearing = 30

    [depth]
    type = channel                  ; constant | channel | bump
    x = 50
    y = 50
    bearing = 90
    depth_max = 2
    width = 15

    [coupling]
    d_ref = 2
    gamma = 1

Pipeline files add ``[input]`` (``log`` or ``scenario`` path), ``[sync]``,
``[gp]``, ``[grid]`` and ``[output]``; a pipeline file may instead carry the
scenario sections inline.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .gp import KINDS, kernel_kind
from .simulate import (
    DEFAULT_RATES,
    BumpDepth,
    ChannelDepth,
    ConstantDepth,
    DepthCoupling,
    FieldSpec,
    NoiseSpec,
    ScenarioSpec,
    ShearField,
    Trajectory,
    UniformField,
    VortexField,
    lawnmower,
)
from .sync import DEFAULT_SLOP
from .telemetry import GeoPoint, LocalPoint, Vec2


def _float(sec: configparser.SectionProxy, key: str, default: float | None = None) -> float:
    raw = sec.get(key)
    if raw is None:
        if default is None:
            raise ConfigError(f"[{sec.name}] missing required key {key!r}")
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key} = {raw!r} is not a number") from None


def _int(sec: configparser.SectionProxy, key: str, default: int) -> int:
    raw = sec.get(key)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key} = {raw!r} is not an integer") from None


def _floats(sec: configparser.SectionProxy, key: str, n: int) -> list[float]:
    raw = sec.get(key, "")
    try:
        vals = [float(v) for v in raw.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"[{sec.name}] {key} = {raw!r} is not a number list") from None
    if len(vals) != n:
        raise ConfigError(f"[{sec.name}] {key} needs {n} numbers, got {len(vals)}")
    return vals


def _vector(sec: configparser.SectionProxy, e: str = "e", n: str = "n") -> Vec2:
    if "speed" in sec and e == "e":
        return Vec2.from_polar(_float(sec, "speed"), _float(sec, "bearing", 0.0))
    return Vec2(_float(sec, e, 0.0), _float(sec, n, 0.0))


def _vector_field(cp: configparser.ConfigParser, name: str):
    if name not in cp:
        return UniformField(Vec2(0.0, 0.0))
    sec = cp[name]
    kind = sec.get("type", "uniform").strip().lower()
    if kind == "uniform":
        return UniformField(_vector(sec))
    if kind == "shear":
        return ShearField(_vector(sec), _vector(sec, "de", "dn"))
    if kind == "vortex":
        return VortexField(LocalPoint(_float(sec, "x"), _float(sec, "y")),
                           _float(sec, "strength"), _float(sec, "radius"))
    raise ConfigError(f"[{name}] unknown field type {kind!r}")


def _depth_field(cp: configparser.ConfigParser):
    if "depth" not in cp:
        return ConstantDepth(5.0)
    sec = cp["depth"]
    kind = sec.get("type", "constant").strip().lower()
    if kind == "constant":
        return ConstantDepth(_float(sec, "d", 5.0))
    if kind == "channel":
        return ChannelDepth(LocalPoint(_float(sec, "x"), _float(sec, "y")), _float(sec, "bearing", 0.0),
                            _float(sec, "depth_max"), _float(sec, "width"), _float(sec, "shoal", 0.5))
    if kind == "bump":
        return BumpDepth(LocalPoint(_float(sec, "x"), _float(sec, "y")), _float(sec, "amplitude"),
                         _float(sec, "sigma"), _float(sec, "base", 5.0))
    raise ConfigError(f"[depth] unknown field type {kind!r}")


def _trajectory(sec: configparser.SectionProxy) -> Trajectory:
    speed = _float(sec, "speed", 2.0)
    if "waypoints" in sec:
        wps = []
        for chunk in sec["waypoints"].split(";"):
            parts = chunk.replace(",", " ").split()
            if len(parts) != 2:
                raise ConfigError(f"[scenario] bad waypoint {chunk.strip()!r}")
            try:
                wps.append(LocalPoint(float(parts[0]), float(parts[1])))
            except ValueError:
                raise ConfigError(f"[scenario] bad waypoint {chunk.strip()!r}") from None
        return Trajectory(tuple(wps), speed)
    bbox = _floats(sec, "lawnmower", 4) if "lawnmower" in sec else [0.0, 0.0, 100.0, 100.0]
    return lawnmower(tuple(bbox), _float(sec, "spacing", 10.0), speed)


def scenario_from_parser(cp: configparser.ConfigParser) -> ScenarioSpec:
    if "scenario" not in cp:
        raise ConfigError("missing [scenario] section")
    sec = cp["scenario"]
    try:
        origin = GeoPoint(*_floats(sec, "origin", 2)) if "origin" in sec else GeoPoint(34.0, -81.0)
        rates = {k: _float(sec, f"rate_{k}", v) for k, v in DEFAULT_RATES.items()}
        noise = NoiseSpec()
        if "noise" in cp:
            ns = cp["noise"]
            if "sensors" in ns:
                noise = NoiseSpec.sensors(_float(ns, "sensors"))
            noise = NoiseSpec(**{k: _float(ns, k, getattr(noise, k))
                                 for k in NoiseSpec.__dataclass_fields__})
        coupling = None
        if "coupling" in cp:
            coupling = DepthCoupling(_float(cp["coupling"], "d_ref"), _float(cp["coupling"], "gamma", 1.0))
        fld = FieldSpec(_vector_field(cp, "wind"), _vector_field(cp, "current"), _depth_field(cp), coupling)
        return ScenarioSpec(
            field=fld,
            trajectory=_trajectory(sec),
            origin=origin,
            rates=rates,
            noise=noise,
            seed=_int(sec, "seed", 0),
            start_time=_float(sec, "start_time", 0.0),
            turn_guard=_float(sec, "turn_guard", 0.5),
            mission_id=sec.get("mission_id", "synthetic"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _read(path: str | os.PathLike) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return cp


def load_scenario(path: str | os.PathLike) -> ScenarioSpec:
    return scenario_from_parser(_read(path))


@dataclass(frozen=True)
class PipelineConfig:
    log: Path | None = None
    scenario: ScenarioSpec | None = None
    slop: float = DEFAULT_SLOP
    kernel: str = "matern32"
    compare_kernels: tuple[str, ...] = KINDS
    budget: int = 150
    seed: int = 0
    resolution: float = 2.0
    margin: float = 0.0
    out_dir: Path = Path("out")
    met_convention: bool = False

    def __post_init__(self):
        if (self.log is None) == (self.scenario is None):
            raise ConfigError("exactly one of an input log or a scenario must be given")
        if not self.slop > 0.0 or not self.resolution > 0.0 or self.margin < 0.0:
            raise ConfigError("slop and resolution must be positive, margin non-negative")
        if self.budget < 1:
            raise ConfigError("optimizer budget must be at least 1")


def load_pipeline(path: str | os.PathLike, overrides: dict | None = None) -> PipelineConfig:
    cp = _read(path)
    base = Path(path).resolve().parent
    kw: dict = {}
    if "input" in cp:
        sec = cp["input"]
        if "log" in sec:
            kw["log"] = base / sec["log"]
        if "scenario" in sec:
            kw["scenario"] = load_scenario(base / sec["scenario"])
    if "scenario" in cp:
        if "scenario" in kw:
            raise ConfigError("scenario given both inline and by path")
        kw["scenario"] = scenario_from_parser(cp)
    if "sync" in cp:
        kw["slop"] = _float(cp["sync"], "slop", DEFAULT_SLOP)
    if "gp" in cp:
        sec = cp["gp"]
        try:
            if "kernel" in sec:
                kw["kernel"] = kernel_kind(sec["kernel"])
            if "compare" in sec:
                kw["compare_kernels"] = tuple(kernel_kind(k) for k in sec["compare"].split(",") if k.strip())
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        kw["budget"] = _int(sec, "budget", 150)
        kw["seed"] = _int(sec, "seed", 0)
    if "grid" in cp:
        kw["resolution"] = _float(cp["grid"], "resolution", 2.0)
        kw["margin"] = _float(cp["grid"], "margin", 0.0)
    if "output" in cp:
        sec = cp["output"]
        if "dir" in sec:
            kw["out_dir"] = base / sec["dir"]
        try:
            kw["met_convention"] = sec.getboolean("met_convention", False)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    for k, v in (overrides or {}).items():
        if v is not None:
            kw[k] = v
    return PipelineConfig(**kw)
