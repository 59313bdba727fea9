"""Analytic ground-truth fields and a seeded forward sensor simulator.

The simulator is the inverse of :mod:`forcefield.fusion`: a kinematic boat
follows straight legs at constant speed, and each sensor reports what it
would see from the moving hull. Its rotation and projection code is kept
separate from the fusion code on purpose so the two can check each other.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import DegenerateTrajectory
from .logio import MissionLog
from .telemetry import (
    SENSOR_BEARINGS,
    CurrentQuad,
    DepthSample,
    GeoPoint,
    LocalPoint,
    PoseSample,
    Vec2,
    WindSample,
    bearing_of,
    to_geo,
    wrap_deg,
    wrap_deg180,
)

# ----------------------------------------------------------------- fields


@dataclass(frozen=True)
class UniformField:
    v: Vec2

    def at(self, p: LocalPoint) -> Vec2:
        return self.v


@dataclass(frozen=True)
class ShearField:
    """``v0`` at y = 0, changing by ``gradient`` (m/s per meter) northwards."""

    v0: Vec2
    gradient: Vec2

    def at(self, p: LocalPoint) -> Vec2:
        return Vec2(self.v0.e + self.gradient.e * p.y, self.v0.n + self.gradient.n * p.y)


@dataclass(frozen=True)
class VortexField:
    """Rankine vortex: solid-body core, 1/r decay outside.

    ``strength`` is the peak tangential speed, reached at ``radius``.
    Positive strength circulates counter-clockwise seen from above.
    """

    center: LocalPoint
    strength: float
    radius: float

    def at(self, p: LocalPoint) -> Vec2:
        dx, dy = p.x - self.center.x, p.y - self.center.y
        r = math.hypot(dx, dy)
        if r == 0.0:
            return Vec2(0.0, 0.0)
        speed = self.strength * (r / self.radius if r <= self.radius else self.radius / r)
        return Vec2(-dy / r * speed, dx / r * speed)


VectorField = Union[UniformField, ShearField, VortexField]


@dataclass(frozen=True)
class ConstantDepth:
    d: float

    def at(self, p: LocalPoint) -> float:
        return self.d


@dataclass(frozen=True)
class ChannelDepth:
    """Gaussian channel profile across a straight axis.

    The axis passes through ``through`` with compass ``bearing``; depth is
    ``depth_max`` on the axis and falls towards ``shoal`` far from it.
    """

    through: LocalPoint
    bearing: float
    depth_max: float
    width: float
    shoal: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.shoal <= self.depth_max or self.width <= 0.0:
            raise ValueError(f"invalid channel {self}")

    def at(self, p: LocalPoint) -> float:
        b = math.radians(self.bearing)
        dx, dy = p.x - self.through.x, p.y - self.through.y
        off = dx * math.cos(b) - dy * math.sin(b)  # signed distance from the axis
        return self.shoal + (self.depth_max - self.shoal) * math.exp(-0.5 * (off / self.width) ** 2)


@dataclass(frozen=True)
class BumpDepth:
    center: LocalPoint
    amplitude: float
    sigma: float
    base: float = 5.0

    def __post_init__(self):
        if self.base <= 0.0 or self.base + min(self.amplitude, 0.0) <= 0.0 or self.sigma <= 0.0:
            raise ValueError(f"bump makes depth non-positive: {self}")

    def at(self, p: LocalPoint) -> float:
        r2 = (p.x - self.center.x) ** 2 + (p.y - self.center.y) ** 2
        return self.base + self.amplitude * math.exp(-0.5 * r2 / self.sigma ** 2)


DepthField = Union[ConstantDepth, ChannelDepth, BumpDepth]


@dataclass(frozen=True)
class DepthCoupling:
    """Current speed scaled by ``(d_ref / depth) ** gamma``: shallower is faster."""

    d_ref: float
    gamma: float = 1.0


@dataclass(frozen=True)
class FieldSpec:
    wind: VectorField = UniformField(Vec2(0.0, 0.0))
    current: VectorField = UniformField(Vec2(0.0, 0.0))
    depth: DepthField = ConstantDepth(5.0)
    coupling: DepthCoupling | None = None


def truth_at(f: FieldSpec, p: LocalPoint) -> tuple[Vec2, Vec2, float]:
    depth = f.depth.at(p)
    current = f.current.at(p)
    if f.coupling is not None:
        current = current * (f.coupling.d_ref / depth) ** f.coupling.gamma
    return f.wind.at(p), current, depth


# -------------------------------------------------------------- trajectory


@dataclass(frozen=True)
class Trajectory:
    waypoints: tuple[LocalPoint, ...]
    speed: float

    def __post_init__(self):
        wps = tuple(self.waypoints)
        object.__setattr__(self, "waypoints", wps)
        if len(wps) < 2:
            raise DegenerateTrajectory("need at least two waypoints")
        if not self.speed > 0.0:
            raise DegenerateTrajectory("boat speed must be positive")
        for a, b in zip(wps, wps[1:]):
            if a.distance(b) == 0.0:
                raise DegenerateTrajectory(f"repeated waypoint {a}")

    def leg_times(self) -> list[float]:
        """Arrival time at every waypoint, starting at 0."""
        out = [0.0]
        for a, b in zip(self.waypoints, self.waypoints[1:]):
            out.append(out[-1] + a.distance(b) / self.speed)
        return out

    @property
    def duration(self) -> float:
        return self.leg_times()[-1]


def lawnmower(bbox: tuple[float, float, float, float], spacing: float,
              speed: float) -> Trajectory:
    """North-south boustrophedon over ``(x_min, y_min, x_max, y_max)``."""
    x0, y0, x1, y1 = bbox
    if not spacing > 0.0:
        raise ValueError("spacing must be positive")
    n_legs = int(math.floor((x1 - x0) / spacing + 1e-9)) + 1
    wps = []
    for i in range(n_legs):
        x = x0 + i * spacing
        ys = (y0, y1) if i % 2 == 0 else (y1, y0)
        wps.extend(LocalPoint(x, y) for y in ys)
    return Trajectory(tuple(wps), speed)


# ----------------------------------------------------------- sensor models


def world_to_boat(v: Vec2, heading: float) -> tuple[float, float]:
    """(fwd, stbd) components of a world vector for a boat on ``heading``."""
    h = math.radians(heading)
    return (v.e * math.sin(h) + v.n * math.cos(h),
            v.e * math.cos(h) - v.n * math.sin(h))


def apparent_wind(true_wind: Vec2, vel: Vec2, heading: float) -> tuple[float, float]:
    """Anemometer (speed, flow bearing relative to bow) on a moving boat."""
    fwd, stbd = world_to_boat(true_wind - vel, heading)
    return math.hypot(fwd, stbd), wrap_deg(math.degrees(math.atan2(stbd, fwd)))


def current_readings(true_current: Vec2, vel: Vec2, heading: float) -> tuple[float, ...]:
    """Clipped-cosine response of the four paddle wheels to relative flow."""
    fwd, stbd = world_to_boat(true_current - vel, heading)
    speed = math.hypot(fwd, stbd)
    flow_bearing = math.degrees(math.atan2(stbd, fwd))
    out = []
    for axis in SENSOR_BEARINGS:
        off = wrap_deg180(flow_bearing - axis)
        out.append(speed * math.cos(math.radians(off)) if abs(off) < 90.0 else 0.0)
    return tuple(out)


# --------------------------------------------------------------- scenario

DEFAULT_RATES = {"pose": 5.0, "wind": 4.0, "current": 10.0, "depth": 1.0}


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian standard deviations per sensor channel."""

    wind_speed: float = 0.0
    wind_dir: float = 0.0  # degrees
    current: float = 0.0
    depth: float = 0.0
    pose_pos: float = 0.0  # meters
    pose_vel: float = 0.0
    heading: float = 0.0  # degrees

    @classmethod
    def sensors(cls, sigma: float) -> NoiseSpec:
        """Same sigma on wind speed, each current wheel and depth."""
        return cls(wind_speed=sigma, current=sigma, depth=sigma)


@dataclass(frozen=True)
class ScenarioSpec:
    field: FieldSpec
    trajectory: Trajectory
    origin: GeoPoint = GeoPoint(34.0, -81.0)
    rates: dict = field(default_factory=lambda: dict(DEFAULT_RATES))
    noise: NoiseSpec = NoiseSpec()
    seed: int = 0
    start_time: float = 0.0
    # sensor samples this close to a heading change are not recorded
    turn_guard: float = 0.5
    mission_id: str = "synthetic"

    def __post_init__(self):
        rates = dict(DEFAULT_RATES)
        rates.update(self.rates)
        if any(not r > 0.0 for r in rates.values()):
            raise ValueError("sample rates must be positive")
        object.__setattr__(self, "rates", rates)
        if self.turn_guard < 0.0:
            raise ValueError("turn_guard must be non-negative")


@dataclass(frozen=True)
class BoatState:
    pos: LocalPoint
    vel: Vec2
    heading: float
    leg: int


def boat_state(traj: Trajectory, t: float, times: Sequence[float] | None = None) -> BoatState:
    """Kinematic state ``t`` seconds after the start of the trajectory."""
    times = traj.leg_times() if times is None else times
    wps = traj.waypoints
    leg = min(max(bisect.bisect_right(times, t) - 1, 0), len(wps) - 2)
    a, b = wps[leg], wps[leg + 1]
    frac = (t - times[leg]) / (times[leg + 1] - times[leg])
    pos = LocalPoint(a.x + frac * (b.x - a.x), a.y + frac * (b.y - a.y))
    heading = bearing_of(b.x - a.x, b.y - a.y)
    return BoatState(pos, Vec2.from_polar(traj.speed, heading), heading, leg)


def sample_times(rate: float, duration: float, rng: np.random.Generator) -> np.ndarray:
    """Nominal grid at ``rate`` with uniform jitter of +-10% of the period."""
    period = 1.0 / rate
    n = int(math.floor(duration * rate)) + 1
    t = np.arange(n) * period + rng.uniform(-0.1 * period, 0.1 * period, size=n)
    return t[(t >= 0.0) & (t <= duration)]


def simulate_run(s: ScenarioSpec) -> MissionLog:
    traj = s.trajectory
    times = traj.leg_times()
    duration = times[-1]
    turns = np.array(times[1:-1])
    streams = ("pose", "wind", "current", "depth")
    rngs = dict(zip(streams, (np.random.default_rng(c) for c in
                              np.random.SeedSequence(s.seed).spawn(len(streams)))))
    nz = s.noise

    def near_turn(t: float) -> bool:
        return turns.size > 0 and float(np.min(np.abs(turns - t))) < s.turn_guard

    pose, wind, current, depth = [], [], [], []
    for t in sample_times(s.rates["pose"], duration, rngs["pose"]):
        st = boat_state(traj, t, times)
        rng = rngs["pose"]
        pos = LocalPoint(st.pos.x + rng.normal(0.0, nz.pose_pos) if nz.pose_pos else st.pos.x,
                         st.pos.y + rng.normal(0.0, nz.pose_pos) if nz.pose_pos else st.pos.y)
        vel = st.vel
        if nz.pose_vel:
            vel = Vec2(vel.e + rng.normal(0.0, nz.pose_vel), vel.n + rng.normal(0.0, nz.pose_vel))
        heading = wrap_deg(st.heading + rng.normal(0.0, nz.heading)) if nz.heading else st.heading
        pose.append(PoseSample(s.start_time + float(t), to_geo(s.origin, pos), vel, heading))

    for t in sample_times(s.rates["wind"], duration, rngs["wind"]):
        if near_turn(t):
            continue
        st = boat_state(traj, t, times)
        w, _, _ = truth_at(s.field, st.pos)
        speed, rel = apparent_wind(w, st.vel, st.heading)
        rng = rngs["wind"]
        if nz.wind_speed:
            speed = max(0.0, speed + rng.normal(0.0, nz.wind_speed))
        if nz.wind_dir:
            rel = wrap_deg(rel + rng.normal(0.0, nz.wind_dir))
        wind.append(WindSample(s.start_time + float(t), speed, rel))

    for t in sample_times(s.rates["current"], duration, rngs["current"]):
        if near_turn(t):
            continue
        st = boat_state(traj, t, times)
        _, c, _ = truth_at(s.field, st.pos)
        f = current_readings(c, st.vel, st.heading)
        if nz.current:
            f = tuple(max(0.0, v + rngs["current"].normal(0.0, nz.current)) for v in f)
        current.append(CurrentQuad(s.start_time + float(t), f))

    for t in sample_times(s.rates["depth"], duration, rngs["depth"]):
        if near_turn(t):
            continue
        st = boat_state(traj, t, times)
        _, _, d = truth_at(s.field, st.pos)
        if nz.depth:
            d = max(0.01, d + rngs["depth"].normal(0.0, nz.depth))
        depth.append(DepthSample(s.start_time + float(t), d))

    return MissionLog(origin=s.origin, pose=tuple(pose), wind=tuple(wind),
                      current=tuple(current), depth=tuple(depth), mission_id=s.mission_id)
