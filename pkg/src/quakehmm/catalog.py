"""Earthquake catalogs, interevent times and geographic region partitions.

Times are fractional days since the catalog epoch (the calendar date of the
earliest record, at midnight).  Locations are raw decimal degrees.
"""
from __future__ import annotations

import csv
import datetime as dt
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CatalogError, InsufficientDataError, DegenerateGeometryError

log = logging.getLogger(__name__)

CSV_HEADER = ("date", "time", "magnitude", "latitude", "longitude")

EAST_WEST = {1: 1, 2: 1, 3: 2, 4: 2}
NORTH_SOUTH = {2: 1, 3: 1, 1: 2, 4: 2}
SINGLE_REGION = {1: 1, 2: 1, 3: 1, 4: 1}

PARTITION_MODES = ("single-region", "half-plane", "quadrant-merge")


@dataclass(frozen=True)
class Event:
    time: float
    magnitude: float
    latitude: float
    longitude: float
    region: int | None = None

    def __post_init__(self):
        if not math.isfinite(self.time):
            raise ValueError(f"event time must be finite, got {self.time}")
        if not self.magnitude >= 0:
            raise ValueError(f"magnitude must be >= 0, got {self.magnitude}")
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError(f"longitude {self.longitude} outside [-180, 180]")
        if self.region is not None and self.region < 1:
            raise ValueError(f"region labels start at 1, got {self.region}")


@dataclass(frozen=True)
class Catalog:
    """Time-ordered mainshock events.

    ``unsorted_rows`` counts records that arrived out of time order when the
    catalog was loaded from disk; they have been sorted.
    """

    events: tuple[Event, ...]
    epoch: dt.date
    unsorted_rows: int = 0

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        times = [e.time for e in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("catalog events must be sorted by time")

    def __len__(self):
        return len(self.events)

    @property
    def times(self) -> np.ndarray:
        return np.array([e.time for e in self.events], dtype=float)

    @property
    def regions(self) -> list[int | None]:
        return [e.region for e in self.events]

    @property
    def has_regions(self) -> bool:
        return bool(self.events) and all(e.region is not None for e in self.events)

    def day_number(self, date: dt.date | dt.datetime) -> float:
        """Fractional days from the epoch to ``date``."""
        return datetime_to_days(date, self.epoch)

    def date_of(self, time: float) -> dt.datetime:
        return days_to_datetime(time, self.epoch)

    def between(self, start: float | None = None, end: float | None = None) -> "Catalog":
        """Sub-catalog of events with ``start <= time <= end`` (same epoch)."""
        lo = -math.inf if start is None else start
        hi = math.inf if end is None else end
        return Catalog(tuple(e for e in self.events if lo <= e.time <= hi), self.epoch)


@dataclass(frozen=True)
class ObservationSequence:
    """Interevent times in days, optionally paired with region labels."""

    interevent_times: np.ndarray
    regions: np.ndarray | None = None

    def __post_init__(self):
        y = np.array(self.interevent_times, dtype=float).reshape(-1)
        if np.any(~np.isfinite(y)) or np.any(y < 0):
            raise ValueError("interevent times must be finite and non-negative")
        y.setflags(write=False)
        object.__setattr__(self, "interevent_times", y)
        if self.regions is not None:
            v = np.array(self.regions, dtype=np.int64).reshape(-1)
            if v.shape != y.shape:
                raise ValueError(
                    f"regions has length {v.size}, interevent_times has {y.size}")
            if np.any(v < 1):
                raise ValueError("region labels start at 1")
            v.setflags(write=False)
            object.__setattr__(self, "regions", v)

    def __len__(self):
        return self.interevent_times.size

    @property
    def length(self) -> int:
        return len(self)

    def __getitem__(self, item: slice) -> "ObservationSequence":
        if not isinstance(item, slice):
            raise TypeError("ObservationSequence supports slicing only")
        regions = None if self.regions is None else self.regions[item]
        return ObservationSequence(self.interevent_times[item], regions)

    def without_regions(self) -> "ObservationSequence":
        return ObservationSequence(self.interevent_times)


@dataclass(frozen=True)
class RegionPartition:
    """Split of the plane by the principal axes of the event locations.

    ``center`` and ``axis`` are (longitude, latitude) pairs.  The minor axis is
    the major axis rotated 90 degrees counterclockwise.  Quadrant 1 is
    (major > 0, minor <= 0) and numbering proceeds counterclockwise; points on
    an axis go to the lower-numbered adjacent quadrant.
    """

    mode: str = "quadrant-merge"
    center: tuple[float, float] = (0.0, 0.0)
    axis: tuple[float, float] = (1.0, 0.0)
    merge_map: Mapping[int, int] = field(default_factory=lambda: dict(EAST_WEST))

    def __post_init__(self):
        if self.mode not in PARTITION_MODES:
            raise ValueError(f"unknown partition mode {self.mode!r}")
        norm = math.hypot(*self.axis)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"axis must have unit norm, got {norm}")
        merge = {int(k): int(v) for k, v in dict(self.merge_map).items()}
        if sorted(merge) != [1, 2, 3, 4]:
            raise ValueError("merge_map must map each quadrant 1..4")
        labels = set(merge.values())
        if labels != set(range(1, max(labels) + 1)):
            raise ValueError("merge_map must be onto 1..R")
        object.__setattr__(self, "merge_map", merge)
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "axis", tuple(float(a) for a in self.axis))

    @property
    def n_regions(self) -> int:
        if self.mode == "single-region":
            return 1
        if self.mode == "half-plane":
            return 2
        return max(self.merge_map.values())

    @property
    def minor_axis(self) -> tuple[float, float]:
        ax, ay = self.axis
        return (-ay, ax)

    def flipped(self) -> "RegionPartition":
        """Same partition with the axis sign reversed and quadrants relabeled."""
        merge = {q: self.merge_map[(q + 1) % 4 + 1] for q in range(1, 5)}
        return replace(self, axis=(-self.axis[0], -self.axis[1]), merge_map=merge)

    def projections(self, longitude, latitude) -> tuple[np.ndarray, np.ndarray]:
        dx = np.asarray(longitude, dtype=float) - self.center[0]
        dy = np.asarray(latitude, dtype=float) - self.center[1]
        major = dx * self.axis[0] + dy * self.axis[1]
        mx, my = self.minor_axis
        minor = dx * mx + dy * my
        return major, minor

    def quadrant(self, longitude, latitude) -> np.ndarray:
        major, minor = self.projections(longitude, latitude)
        right = major >= 0
        q = np.where(right, np.where(minor <= 0, 1, 2), np.where(minor >= 0, 3, 4))
        return q.astype(np.int64)

    def label(self, longitude, latitude) -> np.ndarray:
        if self.mode == "single-region":
            return np.ones(np.shape(longitude), dtype=np.int64)
        if self.mode == "half-plane":
            major, _ = self.projections(longitude, latitude)
            return np.where(major >= 0, 1, 2).astype(np.int64)
        lookup = np.array([0] + [self.merge_map[q] for q in range(1, 5)], dtype=np.int64)
        return lookup[self.quadrant(longitude, latitude)]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "center": list(self.center),
            "axis": list(self.axis),
            "merge_map": {str(k): v for k, v in sorted(self.merge_map.items())},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RegionPartition":
        return cls(
            mode=d["mode"],
            center=tuple(d["center"]),
            axis=tuple(d["axis"]),
            merge_map={int(k): int(v) for k, v in d["merge_map"].items()},
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RegionPartition":
        return cls.from_dict(json.loads(text))


def datetime_to_days(when: dt.date | dt.datetime, epoch: dt.date) -> float:
    days = when.toordinal() - epoch.toordinal()
    if isinstance(when, dt.datetime):
        seconds = when.hour * 3600 + when.minute * 60 + when.second + when.microsecond / 1e6
        return days + seconds / 86400.0
    return float(days)


def days_to_datetime(time: float, epoch: dt.date) -> dt.datetime:
    day = math.floor(time)
    seconds = round((time - day) * 86400.0)
    base = dt.datetime.combine(dt.date.fromordinal(epoch.toordinal() + day), dt.time())
    return base + dt.timedelta(seconds=seconds)


def _parse_time_of_day(text: str) -> float:
    if not text:
        return 0.0
    hh, mm, ss = text.split(":")
    h, m, s = int(hh), int(mm), float(ss)
    if not (0 <= h < 24 and 0 <= m < 60 and 0 <= s < 61):
        raise ValueError(f"time of day {text!r} out of range")
    return (h * 3600 + m * 60 + s) / 86400.0


def load_catalog(path: str | Path, min_magnitude: float = 4.0) -> Catalog:
    """Read a catalog CSV, keeping events with magnitude >= ``min_magnitude``.

    The CSV has the header ``date,time,magnitude,latitude,longitude``; an
    optional ``region`` column carries precomputed labels and any further
    columns (e.g. ``true_state``) are ignored.  Row numbers in error messages
    count the header as row 1.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = [f.strip() for f in (reader.fieldnames or [])]
        if not fields:
            return Catalog((), dt.date(1970, 1, 1))
        missing = {"date", "magnitude", "latitude", "longitude"} - set(fields)
        if missing:
            raise CatalogError(f"{path}: missing columns {sorted(missing)}")
        reader.fieldnames = fields
        raw = []
        for rowno, row in enumerate(reader, start=2):
            try:
                date = dt.date.fromisoformat(row["date"].strip())
                tod = _parse_time_of_day((row.get("time") or "").strip())
                mag = float(row["magnitude"])
                lat = float(row["latitude"])
                lon = float(row["longitude"])
                region_text = (row.get("region") or "").strip()
                region = int(region_text) if region_text else None
                if not -90.0 <= lat <= 90.0:
                    raise ValueError(f"latitude {lat} outside [-90, 90]")
                if not -180.0 <= lon <= 180.0:
                    raise ValueError(f"longitude {lon} outside [-180, 180]")
                if not mag >= 0:
                    raise ValueError(f"magnitude {mag} is negative")
            except (ValueError, TypeError, AttributeError) as exc:
                raise CatalogError(f"{path}: row {rowno}: {exc}") from exc
            raw.append((date, tod, mag, lat, lon, region))

    if not raw:
        return Catalog((), dt.date(1970, 1, 1))
    epoch = min(r[0] for r in raw)
    keyed = [(r[0].toordinal() - epoch.toordinal() + r[1], r) for r in raw]
    unsorted = sum(1 for a, b in zip(keyed, keyed[1:]) if b[0] < a[0])
    if unsorted:
        log.warning("%s: %d rows out of time order; sorted", path, unsorted)
        keyed.sort(key=lambda kr: kr[0])
    events = tuple(
        Event(t, r[2], r[3], r[4], r[5]) for t, r in keyed if r[2] >= min_magnitude
    )
    return Catalog(events, epoch, unsorted)


def catalog_rows(catalog: Catalog, true_states: Sequence[int] | None = None) -> list[list[str]]:
    header = list(CSV_HEADER)
    with_regions = catalog.has_regions
    if with_regions:
        header.append("region")
    if true_states is not None:
        header.append("true_state")
    rows = [header]
    for i, e in enumerate(catalog.events):
        when = catalog.date_of(e.time)
        row = [
            when.date().isoformat(),
            when.strftime("%H:%M:%S"),
            repr(float(e.magnitude)),
            repr(float(e.latitude)),
            repr(float(e.longitude)),
        ]
        if with_regions:
            row.append(str(e.region))
        if true_states is not None:
            row.append(str(int(true_states[i]) + 1))
        rows.append(row)
    return rows


def compute_principal_axes(
    catalog: Catalog,
    merge_map: Mapping[int, int] = EAST_WEST,
    mode: str = "quadrant-merge",
) -> RegionPartition:
    """Principal axes of the event locations in raw (longitude, latitude).

    The major axis is the covariance eigenvector with the largest eigenvalue,
    signed to point east (or north when exactly north-south).
    """
    if len(catalog) < 2:
        raise DegenerateGeometryError("need at least 2 events to compute principal axes")
    xy = np.array([(e.longitude, e.latitude) for e in catalog.events], dtype=float)
    if len(np.unique(xy, axis=0)) < 2:
        raise DegenerateGeometryError("need at least 2 distinct event locations")
    center = xy.mean(axis=0)
    cov = np.cov(xy - center, rowvar=False)
    _, vecs = np.linalg.eigh(cov)
    axis = vecs[:, -1] / np.linalg.norm(vecs[:, -1])
    if axis[0] < 0 or (axis[0] == 0 and axis[1] < 0):
        axis = -axis
    return RegionPartition(mode, tuple(center), tuple(axis), dict(merge_map))


def assign_regions(catalog: Catalog, partition: RegionPartition) -> Catalog:
    if not catalog.events:
        return catalog
    lon = np.array([e.longitude for e in catalog.events])
    lat = np.array([e.latitude for e in catalog.events])
    labels = partition.label(lon, lat)
    events = tuple(replace(e, region=int(v)) for e, v in zip(catalog.events, labels))
    return Catalog(events, catalog.epoch, catalog.unsorted_rows)


def to_observations(catalog: Catalog) -> ObservationSequence:
    if len(catalog) < 2:
        raise InsufficientDataError(
            f"need at least 2 events for interevent times, got {len(catalog)}")
    y = np.diff(catalog.times)
    regions = None
    if catalog.has_regions:
        regions = np.array(catalog.regions[1:], dtype=np.int64)
    return ObservationSequence(y, regions)


def catalog_from_times(
    times: Iterable[float],
    epoch: dt.date = dt.date(2000, 1, 1),
    regions: Iterable[int] | None = None,
    magnitude: float = 4.0,
) -> Catalog:
    """Build a catalog of placeholder-location events from bare times."""
    times = list(times)
    regions = [None] * len(times) if regions is None else list(regions)
    events = tuple(Event(float(t), magnitude, 0.0, 0.0, r) for t, r in zip(times, regions))
    return Catalog(events, epoch)
