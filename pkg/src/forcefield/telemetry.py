"""Domain types, angle conventions and the local tangent-plane projection.

Conventions used throughout the package:

* World frame is local ENU: ``x``/``e`` points east, ``y``/``n`` points north.
* Headings and bearings are compass degrees, clockwise from true north,
  normalised to ``[0, 360)``.
* Boat frame is ``fwd`` (towards the bow) and ``stbd`` (towards starboard).
* Every vector quantity is a *flow* vector: it points where the medium
  (air, water) or the vehicle is moving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import OutOfRegion

EARTH_RADIUS_M = 6_371_000.0

# Boat-frame bearing of each current sensor axis:
# bow-starboard, stern-starboard, stern-port, bow-port.
SENSOR_BEARINGS = (45.0, 135.0, 225.0, 315.0)

# Largest latitude offset accepted by the equirectangular projection.
MAX_REGION_DEG = 1.0


def _finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


def wrap_deg(a: float) -> float:
    """Normalise an angle in degrees to ``[0, 360)``."""
    r = math.fmod(a, 360.0)
    if r < 0.0:
        r += 360.0
    # fmod of a tiny negative value can round up to exactly 360
    if r >= 360.0:
        r = 0.0
    return r


def wrap_deg180(a: float) -> float:
    """Normalise an angle in degrees to ``[-180, 180)``."""
    return wrap_deg(a + 180.0) - 180.0


def bearing_of(e: float, n: float) -> float:
    """Compass bearing of the vector (e, n); 0 for the zero vector."""
    return wrap_deg(math.degrees(math.atan2(e, n)))


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not _finite(self.lat, self.lon):
            raise ValueError(f"non-finite coordinate {self}")
        if not -90.0 <= self.lat <= 90.0 or not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"coordinate out of range {self}")


@dataclass(frozen=True)
class LocalPoint:
    """Meters east (x) and north (y) of a projection origin."""

    x: float
    y: float

    def __post_init__(self):
        if not _finite(self.x, self.y):
            raise ValueError(f"non-finite local point {self}")

    def distance(self, other: LocalPoint) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Vec2:
    """World-frame vector in m/s (east, north)."""

    e: float
    n: float

    def __post_init__(self):
        if not _finite(self.e, self.n):
            raise ValueError(f"non-finite vector {self}")

    def norm(self) -> float:
        return math.hypot(self.e, self.n)

    def bearing(self) -> float:
        return bearing_of(self.e, self.n)

    def __add__(self, other: Vec2) -> Vec2:
        return Vec2(self.e + other.e, self.n + other.n)

    def __sub__(self, other: Vec2) -> Vec2:
        return Vec2(self.e - other.e, self.n - other.n)

    def __mul__(self, k: float) -> Vec2:
        return Vec2(self.e * k, self.n * k)

    __rmul__ = __mul__

    @classmethod
    def from_polar(cls, speed: float, bearing: float) -> Vec2:
        b = math.radians(bearing)
        return cls(speed * math.sin(b), speed * math.cos(b))


@dataclass(frozen=True)
class BoatVec:
    """Vector in boat axes: ``fwd`` towards the bow, ``stbd`` to starboard."""

    fwd: float
    stbd: float

    def norm(self) -> float:
        return math.hypot(self.fwd, self.stbd)

    def bearing(self) -> float:
        """Bearing relative to the bow, clockwise."""
        return wrap_deg(math.degrees(math.atan2(self.stbd, self.fwd)))


@dataclass(frozen=True)
class PolarReading:
    """Raw speed/bearing pair as reported by a sensor."""

    speed: float
    bearing: float

    def __post_init__(self):
        if not _finite(self.speed, self.bearing) or self.speed < 0.0:
            raise ValueError(f"invalid polar reading {self}")
        if not 0.0 <= self.bearing < 360.0:
            object.__setattr__(self, "bearing", wrap_deg(self.bearing))

    def to_boat(self) -> BoatVec:
        b = math.radians(self.bearing)
        return BoatVec(self.speed * math.cos(b), self.speed * math.sin(b))

    @classmethod
    def from_boat(cls, v: BoatVec) -> PolarReading:
        return cls(v.norm(), v.bearing())


@dataclass(frozen=True)
class PoseSample:
    t: float
    pos: GeoPoint
    vel: Vec2
    heading: float

    def __post_init__(self):
        if not math.isfinite(self.t):
            raise ValueError("non-finite pose time")
        if not (math.isfinite(self.heading) and 0.0 <= self.heading < 360.0):
            raise ValueError(f"heading {self.heading} outside [0, 360)")


@dataclass(frozen=True)
class WindSample:
    """Apparent airflow: speed and flow bearing relative to the bow."""

    t: float
    speed: float
    direction_rel: float

    def __post_init__(self):
        if not _finite(self.t, self.speed, self.direction_rel) or self.speed < 0.0:
            raise ValueError(f"invalid wind sample {self}")
        if not 0.0 <= self.direction_rel < 360.0:
            raise ValueError(f"relative direction {self.direction_rel} outside [0, 360)")


@dataclass(frozen=True)
class CurrentQuad:
    """Four paddle-wheel readings, indexed as in ``SENSOR_BEARINGS``."""

    t: float
    f: tuple[float, float, float, float]

    def __post_init__(self):
        f = tuple(float(v) for v in self.f)
        if len(f) != 4:
            raise ValueError("a current quad needs exactly four readings")
        if not _finite(self.t, *f) or min(f) < 0.0:
            raise ValueError(f"invalid current readings {f}")
        object.__setattr__(self, "f", f)


@dataclass(frozen=True)
class DepthSample:
    t: float
    depth: float

    def __post_init__(self):
        if not _finite(self.t, self.depth) or not 0.0 < self.depth < 1000.0:
            raise ValueError(f"implausible depth {self.depth}")


def to_local(origin: GeoPoint, p: GeoPoint) -> LocalPoint:
    """Project ``p`` onto the tangent plane at ``origin`` (equirectangular)."""
    if abs(p.lat - origin.lat) >= MAX_REGION_DEG:
        raise OutOfRegion(f"{p} is more than {MAX_REGION_DEG} deg from origin {origin}")
    dlon = wrap_deg180(p.lon - origin.lon)
    x = EARTH_RADIUS_M * math.radians(dlon) * math.cos(math.radians(origin.lat))
    y = EARTH_RADIUS_M * math.radians(p.lat - origin.lat)
    return LocalPoint(x, y)


def to_geo(origin: GeoPoint, p: LocalPoint) -> GeoPoint:
    """Inverse of :func:`to_local`."""
    lat = origin.lat + math.degrees(p.y / EARTH_RADIUS_M)
    lon = origin.lon + math.degrees(p.x / (EARTH_RADIUS_M * math.cos(math.radians(origin.lat))))
    if lon >= 180.0 or lon < -180.0:
        lon = wrap_deg180(lon)
    return GeoPoint(lat, lon)
