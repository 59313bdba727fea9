"""Mission log interchange format, NMEA 0183 depth sentences and KML export.

A ``forcefield-log v1`` file is line oriented UTF-8 text::

    forcefield-log v1,<origin_lat>,<origin_lon>
    # mission: <id>
    pose,<t>,<lat>,<lon>,<vel_e>,<vel_n>,<heading>
    wind,<t>,<speed>,<direction_rel>
    current,<t>,<f0>,<f1>,<f2>,<f3>
    depth,<t>,<meters>
    depth,<t>,$SDDBT,...*hh

Lines starting with ``#`` are comments; ``# mission:`` sets the mission id.
A depth record may carry either meters or a raw NMEA sentence.
"""

from __future__ import annotations

import logging
import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from .errors import (
    ChecksumMismatch,
    EmptyLog,
    FormatError,
    InvalidChar,
    MissingDepthField,
    NmeaError,
    NonPositiveDepth,
    UnsupportedSentence,
)
from .telemetry import CurrentQuad, DepthSample, GeoPoint, PoseSample, Vec2, WindSample

log = logging.getLogger(__name__)

HEADER_TAG = "forcefield-log v1"
KML_NS = "http://www.opengis.net/kml/2.2"


@dataclass(frozen=True)
class MissionLog:
    origin: GeoPoint
    pose: tuple[PoseSample, ...]
    wind: tuple[WindSample, ...] = ()
    current: tuple[CurrentQuad, ...] = ()
    depth: tuple[DepthSample, ...] = ()
    mission_id: str = ""
    # bookkeeping from parsing, not part of the log content
    skipped: int = field(default=0, compare=False)
    duplicates: int = field(default=0, compare=False)

    @property
    def start(self) -> float:
        return self.pose[0].t if self.pose else float("nan")

    @property
    def end(self) -> float:
        return self.pose[-1].t if self.pose else float("nan")

    def streams(self) -> dict[str, tuple]:
        return {"pose": self.pose, "wind": self.wind, "current": self.current, "depth": self.depth}


# --------------------------------------------------------------------- NMEA


def nmea_checksum(body: str) -> str:
    """XOR of every byte between ``$`` and ``*``, as two uppercase hex digits."""
    cs = 0
    for ch in body:
        code = ord(ch)
        if code < 0x20 or code > 0x7E or ch in "$*":
            raise InvalidChar(f"character {ch!r} not allowed in an NMEA body")
        cs ^= code
    return f"{cs:02X}"


def make_nmea(body: str) -> str:
    return f"${body}*{nmea_checksum(body)}"


def parse_nmea_depth(sentence: str) -> float:
    """Depth in meters from a DBT or DPT sentence, checksum verified."""
    s = sentence.strip()
    if not s.startswith("$") or "*" not in s:
        raise NmeaError(f"not an NMEA sentence: {sentence!r}")
    body, _, given = s[1:].partition("*")
    if len(given) != 2:
        raise NmeaError(f"bad checksum field {given!r}")
    if nmea_checksum(body) != given.upper():
        raise ChecksumMismatch(f"expected {nmea_checksum(body)}, sentence has {given}")

    fields = body.split(",")
    kind = fields[0][-3:]
    if kind == "DBT":
        # feet,f,meters,M,fathoms,F
        if len(fields) < 5 or fields[4] not in ("M", "m") or not fields[3]:
            raise MissingDepthField(f"no meters field in {sentence!r}")
        raw = fields[3]
    elif kind == "DPT":
        # meters,offset[,range]; transducer offset is not applied
        if len(fields) < 2 or not fields[1]:
            raise MissingDepthField(f"no depth field in {sentence!r}")
        raw = fields[1]
    else:
        raise UnsupportedSentence(f"sentence type {fields[0]!r} carries no supported depth")
    try:
        depth = float(raw)
    except ValueError:
        raise MissingDepthField(f"unparseable depth {raw!r}") from None
    if not depth > 0.0:
        raise NonPositiveDepth(f"depth {depth} is not positive")
    return depth


# ------------------------------------------------------------ log format


def _num(v: float) -> str:
    return repr(float(v))


def format_log(ml: MissionLog) -> str:
    lines = [f"{HEADER_TAG},{_num(ml.origin.lat)},{_num(ml.origin.lon)}"]
    if ml.mission_id:
        lines.append(f"# mission: {ml.mission_id}")
    records = []
    for p in ml.pose:
        records.append((p.t, 0, f"pose,{_num(p.t)},{_num(p.pos.lat)},{_num(p.pos.lon)},"
                                f"{_num(p.vel.e)},{_num(p.vel.n)},{_num(p.heading)}"))
    for w in ml.wind:
        records.append((w.t, 1, f"wind,{_num(w.t)},{_num(w.speed)},{_num(w.direction_rel)}"))
    for c in ml.current:
        records.append((c.t, 2, "current," + ",".join(_num(v) for v in (c.t, *c.f))))
    for d in ml.depth:
        records.append((d.t, 3, f"depth,{_num(d.t)},{_num(d.depth)}"))
    records.sort(key=lambda r: (r[0], r[1]))
    lines.extend(r[2] for r in records)
    return "\n".join(lines) + "\n"


def write_log(ml: MissionLog, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_log(ml))


def _parse_record(kind: str, rest: str):
    if kind == "depth":
        t_raw, _, payload = rest.partition(",")
        t = float(t_raw)
        if payload.startswith("$"):
            return DepthSample(t, parse_nmea_depth(payload))
        return DepthSample(t, float(payload))
    vals = [float(v) for v in rest.split(",")]
    if kind == "pose" and len(vals) == 6:
        t, lat, lon, ve, vn, hdg = vals
        return PoseSample(t, GeoPoint(lat, lon), Vec2(ve, vn), hdg)
    if kind == "wind" and len(vals) == 3:
        return WindSample(*vals)
    if kind == "current" and len(vals) == 5:
        return CurrentQuad(vals[0], tuple(vals[1:]))
    raise ValueError(f"wrong field count for {kind}")


def _dedupe(samples: list, stream: str) -> tuple[tuple, int]:
    samples.sort(key=lambda s: s.t)  # stable: first occurrence wins
    out = []
    dropped = 0
    for s in samples:
        if out and s.t == out[-1].t:
            dropped += 1
            continue
        out.append(s)
    if dropped:
        log.warning("%s: dropped %d samples with duplicate timestamps", stream, dropped)
    return tuple(out), dropped


def parse_log_text(text: str) -> MissionLog:
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty file")
    head = lines[0].strip().split(",")
    if len(head) != 3 or head[0] != HEADER_TAG:
        raise FormatError(f"bad header {lines[0]!r}")
    try:
        origin = GeoPoint(float(head[1]), float(head[2]))
    except ValueError as exc:
        raise FormatError(f"bad origin in header: {exc}") from None

    streams: dict[str, list] = {"pose": [], "wind": [], "current": [], "depth": []}
    mission_id = ""
    skipped = 0
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            tag, sep, value = line[1:].partition(":")
            if sep and tag.strip() == "mission":
                mission_id = value.strip()
            continue
        kind, _, rest = line.partition(",")
        if kind not in streams:
            skipped += 1
            log.debug("line %d: unknown stream %r", lineno, kind)
            continue
        try:
            streams[kind].append(_parse_record(kind, rest))
        except (ValueError, NmeaError) as exc:
            skipped += 1
            log.debug("line %d: skipped (%s)", lineno, exc)
    if skipped:
        log.warning("skipped %d unparseable records", skipped)
    if not streams["pose"]:
        raise EmptyLog("log contains no pose samples")

    dup_total = 0
    parsed = {}
    for name, samples in streams.items():
        parsed[name], dups = _dedupe(samples, name)
        dup_total += dups
    return MissionLog(origin=origin, mission_id=mission_id, skipped=skipped,
                      duplicates=dup_total, **parsed)


def parse_log(path: str | os.PathLike) -> MissionLog:
    with open(path, encoding="utf-8") as fh:
        return parse_log_text(fh.read())


# ------------------------------------------------------------------- KML


def export_kml(ml: MissionLog, path: str | os.PathLike) -> None:
    """Write the pose track as a single KML LineString."""
    if not ml.pose:
        raise EmptyLog("cannot export a track without poses")
    ET.register_namespace("", KML_NS)
    root = ET.Element(f"{{{KML_NS}}}kml")
    doc = ET.SubElement(root, f"{{{KML_NS}}}Document")
    ET.SubElement(doc, f"{{{KML_NS}}}name").text = ml.mission_id or "mission"
    pm = ET.SubElement(doc, f"{{{KML_NS}}}Placemark")
    ET.SubElement(pm, f"{{{KML_NS}}}name").text = "track"
    ls = ET.SubElement(pm, f"{{{KML_NS}}}LineString")
    ET.SubElement(ls, f"{{{KML_NS}}}tessellate").text = "1"
    coords = ET.SubElement(ls, f"{{{KML_NS}}}coordinates")
    coords.text = " ".join(f"{p.pos.lon!r},{p.pos.lat!r}" for p in ml.pose)
    tree = ET.ElementTree(root)
    ET.indent(tree)
    tree.write(path, encoding="utf-8", xml_declaration=True)


def read_kml_coordinates(path: str | os.PathLike) -> list[tuple[float, float]]:
    """(lon, lat) pairs of every LineString in a KML file, in document order."""
    tree = ET.parse(path)
    out = []
    for node in tree.getroot().iter(f"{{{KML_NS}}}coordinates"):
        for tok in (node.text or "").split():
            parts = tok.split(",")
            out.append((float(parts[0]), float(parts[1])))
    return out
