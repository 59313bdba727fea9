"""Self-motion removal and boat-to-world rotation of wind and current readings.

A flow sensor on a moving boat sees the medium's velocity relative to the
boat, ``measured = true - v_boat``. Once the reading is rotated into the
world frame the true flow is recovered as ``measured_world + v_boat``.

The four paddle-wheel sensors sit 90 degrees apart and 45 degrees off the
bow. Each one reads the flow component along its own axis, so the largest
reading and its larger ring-neighbour are two orthogonal projections of the
same vector and can be inverted exactly.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

from .sync import AlignedTuple
from .telemetry import (
    SENSOR_BEARINGS,
    BoatVec,
    CurrentQuad,
    GeoPoint,
    LocalPoint,
    PolarReading,
    PoseSample,
    Vec2,
    WindSample,
    to_local,
    wrap_deg,
)


@dataclass(frozen=True)
class PairSelection:
    i1: int
    f1: float
    i2: int
    f2: float


@dataclass(frozen=True)
class FusedSample:
    t: float
    pos: LocalPoint
    wind_world: Vec2
    current_world: Vec2
    depth: float
    boat_speed: float
    heading: float


def rotate_boat_to_world(v: BoatVec, heading: float) -> Vec2:
    h = math.radians(heading)
    s, c = math.sin(h), math.cos(h)
    return Vec2(v.fwd * s + v.stbd * c, v.fwd * c - v.stbd * s)


def wind_world(w: WindSample, pose: PoseSample) -> Vec2:
    """True wind (direction the air moves) from an apparent reading."""
    apparent = PolarReading(w.speed, w.direction_rel).to_boat()
    return rotate_boat_to_world(apparent, pose.heading) + pose.vel


def select_pair(q: CurrentQuad) -> PairSelection:
    f = q.f
    i1 = max(range(4), key=lambda i: (f[i], -i))
    up, down = (i1 + 1) % 4, (i1 + 3) % 4
    i2 = up if f[up] >= f[down] else down
    return PairSelection(i1, f[i1], i2, f[i2])


def current_boat_frame(sel: PairSelection) -> BoatVec:
    """Relative water flow in boat axes from two orthogonal projections."""
    speed = math.hypot(sel.f1, sel.f2)
    alpha = math.degrees(math.atan2(sel.f2, sel.f1))
    turn = alpha if sel.i2 == (sel.i1 + 1) % 4 else -alpha
    return PolarReading(speed, wrap_deg(SENSOR_BEARINGS[sel.i1] + turn)).to_boat()


def current_world(q: CurrentQuad, pose: PoseSample) -> Vec2:
    """True surface current (direction the water moves)."""
    rel = current_boat_frame(select_pair(q))
    return rotate_boat_to_world(rel, pose.heading) + pose.vel


def fuse_tuple(tup: AlignedTuple, origin: GeoPoint) -> FusedSample:
    pose = tup.pose
    return FusedSample(
        t=tup.t,
        pos=to_local(origin, pose.pos),
        wind_world=wind_world(tup.wind, pose),
        current_world=current_world(tup.current, pose),
        depth=tup.depth.depth,
        boat_speed=pose.vel.norm(),
        heading=pose.heading,
    )


def fuse(tuples: Iterable[AlignedTuple], origin: GeoPoint) -> list[FusedSample]:
    return [fuse_tuple(t, origin) for t in tuples]


FUSED_COLUMNS = ("t", "x", "y", "wind_e", "wind_n", "current_e", "current_n",
                 "depth", "boat_speed", "heading", "origin_lat", "origin_lon")


def write_fused_csv(samples: Sequence[FusedSample], origin: GeoPoint,
                    path: str | os.PathLike) -> None:
    """Fused samples as CSV; every row repeats the projection origin."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FUSED_COLUMNS)
        for s in samples:
            row = (s.t, s.pos.x, s.pos.y, s.wind_world.e, s.wind_world.n,
                   s.current_world.e, s.current_world.n, s.depth, s.boat_speed, s.heading,
                   origin.lat, origin.lon)
            w.writerow([repr(float(v)) for v in row])


def read_fused_csv(path: str | os.PathLike) -> tuple[GeoPoint | None, list[FusedSample]]:
    origin = None
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            v = {k: float(row[k]) for k in FUSED_COLUMNS}
            origin = origin or GeoPoint(v["origin_lat"], v["origin_lon"])
            out.append(FusedSample(
                t=v["t"], pos=LocalPoint(v["x"], v["y"]),
                wind_world=Vec2(v["wind_e"], v["wind_n"]),
                current_world=Vec2(v["current_e"], v["current_n"]),
                depth=v["depth"], boat_speed=v["boat_speed"], heading=v["heading"],
            ))
    return origin, out
