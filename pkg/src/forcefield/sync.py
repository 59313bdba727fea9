"""Greedy approximate-time alignment of the four sensor streams.

The pose stream is the pivot. For each pose sample, in time order, the
nearest not-yet-used sample of every other stream is chosen (ties go to
the earlier sample). The tuple is emitted only when the spread of all
member timestamps is within ``slop``; the chosen samples are then marked
used. Otherwise the pose sample is skipped and nothing is consumed.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Sequence

from .errors import InvalidSlop
from .logio import MissionLog
from .telemetry import CurrentQuad, DepthSample, PoseSample, WindSample

DEFAULT_SLOP = 0.25  # half the 4 Hz anemometer period


@dataclass(frozen=True)
class AlignedTuple:
    t: float
    pose: PoseSample
    wind: WindSample
    current: CurrentQuad
    depth: DepthSample

    @property
    def spread(self) -> float:
        ts = (self.pose.t, self.wind.t, self.current.t, self.depth.t)
        return max(ts) - min(ts)


class _Stream:
    """Sorted sample times with a consumed mask and a nearest-unused search."""

    def __init__(self, samples: Sequence):
        self.samples = samples
        self.times = [s.t for s in samples]
        self.used = [False] * len(samples)

    def nearest(self, t: float, slop: float) -> int | None:
        times, used = self.times, self.used
        k = bisect.bisect_left(times, t)
        left = k - 1
        while left >= 0 and used[left] and t - times[left] <= slop:
            left -= 1
        right = k
        while right < len(times) and used[right] and times[right] - t <= slop:
            right += 1
        best = None
        if left >= 0 and not used[left] and t - times[left] <= slop:
            best = left
        if right < len(times) and not used[right] and times[right] - t <= slop:
            # strict comparison keeps the earlier sample on ties
            if best is None or times[right] - t < t - times[best]:
                best = right
        return best


def align_streams(pose: Sequence[PoseSample], wind: Sequence[WindSample],
                  current: Sequence[CurrentQuad], depth: Sequence[DepthSample],
                  slop: float = DEFAULT_SLOP) -> list[AlignedTuple]:
    if not slop > 0.0:
        raise InvalidSlop(f"slop must be positive, got {slop}")
    others = [_Stream(wind), _Stream(current), _Stream(depth)]
    out = []
    for p in pose:
        picks = [s.nearest(p.t, slop) for s in others]
        if any(i is None for i in picks):
            continue
        ts = [p.t] + [s.times[i] for s, i in zip(others, picks)]
        if max(ts) - min(ts) > slop:
            continue
        for s, i in zip(others, picks):
            s.used[i] = True
        w, c, d = (s.samples[i] for s, i in zip(others, picks))
        out.append(AlignedTuple(p.t, p, w, c, d))
    return out


def align(log: MissionLog, slop: float = DEFAULT_SLOP) -> list[AlignedTuple]:
    """Align a whole mission log; see the module docstring for the policy."""
    return align_streams(log.pose, log.wind, log.current, log.depth, slop)
