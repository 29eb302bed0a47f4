"""Seeded Poisson spike-train generation and merging.

Trains are reproducible by contract: the stream for a train is a
Philox4x64-10 generator keyed on (master seed, link id), and all draws are
raw uniforms passed through fixed inverse-CDF transforms.  Modulated
profiles are realized by thinning a homogeneous process at the peak rate,
so a zero-rate segment can never contain a spike.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .rng import exponential_gap, stream_rng


@dataclass(frozen=True)
class RateSegment:
    start_ms: float
    end_ms: float
    rate_per_ms: float

    def __post_init__(self):
        if self.end_ms <= self.start_ms:
            raise ValueError(f"segment end {self.end_ms} must exceed start {self.start_ms}")
        if self.rate_per_ms < 0:
            raise ValueError("segment rate must be >= 0")


@dataclass(frozen=True)
class RateProfile:
    """Constant rate, or piecewise-constant modulation over a base rate."""

    kind: str                      # "constant" | "modulated"
    base_rate: float               # spikes/ms
    segments: tuple[RateSegment, ...] = ()

    def __post_init__(self):
        if self.kind not in ("constant", "modulated"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.base_rate < 0:
            raise ValueError("base_rate must be >= 0")
        if self.kind == "constant" and self.segments:
            raise ValueError("constant profiles take no segments")
        prev_end = None
        for seg in self.segments:
            if prev_end is not None and seg.start_ms < prev_end:
                raise ValueError("segments must be ordered and non-overlapping")
            prev_end = seg.end_ms

    @classmethod
    def constant(cls, rate_per_ms: float) -> "RateProfile":
        return cls(kind="constant", base_rate=rate_per_ms)

    @classmethod
    def modulated(
        cls, base_rate: float, segments: Iterable[Sequence[float]]
    ) -> "RateProfile":
        return cls(
            kind="modulated",
            base_rate=base_rate,
            segments=tuple(RateSegment(*map(float, s)) for s in segments),
        )

    @cached_property
    def _segment_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        starts = np.array([s.start_ms for s in self.segments])
        ends = np.array([s.end_ms for s in self.segments])
        rates = np.array([s.rate_per_ms for s in self.segments])
        return starts, ends, rates

    def rate_at(self, t_ms: float) -> float:
        """Active rate at time t: the covering segment's, else the base rate."""
        if not self.segments:
            return self.base_rate
        starts, ends, rates = self._segment_arrays
        i = int(np.searchsorted(starts, t_ms, side="right")) - 1
        if i >= 0 and t_ms < ends[i]:
            return float(rates[i])
        return self.base_rate

    def max_rate(self) -> float:
        rates = [self.base_rate] + [s.rate_per_ms for s in self.segments]
        return max(rates)


@dataclass(frozen=True)
class SpikeTrain:
    link_id: int
    times: np.ndarray     # strictly increasing, all in [0, horizon)
    horizon_ms: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", t)
        if t.size and (np.diff(t) <= 0).any():
            raise ValueError("spike times must be strictly increasing")
        if t.size and (t[0] < 0 or t[-1] >= self.horizon_ms):
            raise ValueError("spike times must lie in [0, horizon)")

    def __len__(self) -> int:
        return int(self.times.size)


def generate_poisson(
    profile: RateProfile, horizon_ms: float, seed: int, link_id: int = 0
) -> SpikeTrain:
    """Sample one spike train; identical (profile, horizon, seed, link) pairs
    reproduce identical trains."""
    if horizon_ms <= 0:
        raise ValueError("horizon_ms must be > 0")
    rng = stream_rng(seed, link_id)
    r_max = profile.max_rate()
    times: list[float] = []
    if r_max > 0:
        thin = profile.kind == "modulated"
        t = 0.0
        while True:
            t += exponential_gap(r_max, rng)
            if t >= horizon_ms:
                break
            if thin:
                if rng.random() * r_max < profile.rate_at(t):
                    times.append(t)
            else:
                times.append(t)
    return SpikeTrain(link_id=link_id, times=np.array(times), horizon_ms=horizon_ms)


def merge_trains(trains: Sequence[SpikeTrain]) -> list[tuple[float, int]]:
    """Globally time-ordered (time, link) events; ties break on lower link id."""
    if not trains:
        return []
    horizon = trains[0].horizon_ms
    for tr in trains[1:]:
        if tr.horizon_ms != horizon:
            raise ValueError(
                f"mismatched horizons: {tr.horizon_ms} != {horizon} (link {tr.link_id})"
            )
    events = [(float(t), tr.link_id) for tr in trains for t in tr.times]
    events.sort()
    return events


def write_spike_csv(trains: Sequence[SpikeTrain], path: str | Path) -> None:
    """Two-column (time_ms, link_id) replay file in merged event order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_ms", "link_id"])
        for t, link in merge_trains(trains):
            writer.writerow([repr(t), link])


def read_spike_csv(path: str | Path, horizon_ms: float) -> list[SpikeTrain]:
    """Rebuild per-link trains from a (time_ms, link_id) replay file."""
    by_link: dict[int, list[float]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["time_ms", "link_id"]:
            raise ValueError(f"unexpected spike CSV header: {header}")
        for row in reader:
            by_link.setdefault(int(row[1]), []).append(float(row[0]))
    return [
        SpikeTrain(link_id=link, times=np.array(times), horizon_ms=horizon_ms)
        for link, times in sorted(by_link.items())
    ]
