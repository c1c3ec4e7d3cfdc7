"""Seismic catalog ingestion and coupled-event feature extraction.

A "couple" is a pair of nearly contemporary strong events in a nearby
area. For every event at or above the magnitude cut, the largest
qualifying earlier event within the time and distance windows is chosen
as its mate, and the pair is summarized by four features: the two
magnitudes, their separation in days and their great-circle separation
in kilometers. The forecast target of a couple is the largest magnitude
observed in the fixed look-ahead window after its (later) primary
event.

Catalog CSV format: header ``id,origin_time,lat,lon,depth_km,mag``,
ISO-8601 UTC timestamps, decimal point, optional empty depth.
Couples CSV format: ``primary_id,mate_id,x1,x2,x3_days,x4_km,target,censored``.
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, replace
from datetime import datetime, timezone

import numpy as np

EARTH_RADIUS_KM = 6371.0088
KM_PER_MILE = 1.609344
DAYS_PER_MONTH = 30.44

CATALOG_HEADER = ["id", "origin_time", "lat", "lon", "depth_km", "mag"]
COUPLES_HEADER = ["primary_id", "mate_id", "x1", "x2", "x3_days", "x4_km",
                  "target", "censored"]


class CatalogFormatError(ValueError):
    """Malformed catalog or couples CSV; message names the line."""


def _check_latlon(lat: float, lon: float) -> None:
    if not (math.isfinite(lat) and -90.0 <= lat <= 90.0):
        raise ValueError(f"latitude out of range [-90, 90]: {lat}")
    if not (math.isfinite(lon) and -180.0 <= lon <= 180.0):
        raise ValueError(f"longitude out of range [-180, 180]: {lon}")


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance on a sphere of radius 6371.0088 km.

    Symmetric in its endpoints bit-for-bit (every term is even in the
    coordinate swap). Depth is ignored.
    """
    _check_latlon(lat1, lon1)
    _check_latlon(lat2, lon2)
    p1, l1, p2, l2 = map(math.radians, (lat1, lon1, lat2, lon2))
    sdlat = math.sin((p2 - p1) / 2.0)
    sdlon = math.sin((l2 - l1) / 2.0)
    h = sdlat * sdlat + math.cos(p1) * math.cos(p2) * sdlon * sdlon
    return 2.0 * EARTH_RADIUS_KM * math.atan2(math.sqrt(h), math.sqrt(1.0 - h))


@dataclass(frozen=True)
class SeismicEvent:
    """One catalog row; origin_time is timezone-aware UTC."""

    id: str
    origin_time: datetime
    lat: float
    lon: float
    magnitude: float
    depth_km: float | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("event id must be non-empty")
        t = self.origin_time
        if t.tzinfo is None:
            t = t.replace(tzinfo=timezone.utc)
        else:
            t = t.astimezone(timezone.utc)
        object.__setattr__(self, "origin_time", t)
        _check_latlon(self.lat, self.lon)
        if self.depth_km is not None and not (
            math.isfinite(self.depth_km) and self.depth_km >= 0.0
        ):
            raise ValueError(f"depth must be >= 0 km, got {self.depth_km}")
        if not math.isfinite(self.magnitude):
            raise ValueError(f"magnitude must be finite, got {self.magnitude}")

    @property
    def epoch_seconds(self) -> float:
        return self.origin_time.timestamp()


@dataclass
class CouplingConfig:
    """Couple-detection windows: magnitude cut, time and distance gates,
    and the forecast look-ahead horizon. Defaults are the elicited
    expert values (M >= 5, three months, 190 miles) with a 6-month
    horizon, expressed in km and days."""

    min_mag: float = 5.0
    max_dt_days: float = 91.3
    max_dist_km: float = 190.0 * KM_PER_MILE
    horizon_days: float = 182.6

    def __post_init__(self):
        if not math.isfinite(self.min_mag):
            raise ValueError(f"min_mag must be finite, got {self.min_mag}")
        for name in ("max_dt_days", "max_dist_km", "horizon_days"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ValueError(f"{name} must be > 0, got {v}")


@dataclass(frozen=True)
class CoupleRecord:
    """A detected couple, its feature vector and optional target.

    x1/x2 are the primary and mate magnitudes, x3 the separation in
    days, x4 the great-circle distance in km. ``target`` is the largest
    magnitude in the look-ahead window after the primary (None when the
    window holds no event; such records are excluded from training).
    ``censored`` marks windows extending past the end of the catalog.
    The primary's epicenter is carried along for the optional spatial
    gates on target assignment and alarm matching.
    """

    primary_id: str
    mate_id: str
    primary_time: datetime
    x1: float
    x2: float
    x3_days: float
    x4_km: float
    target: float | None = None
    censored: bool = False
    primary_lat: float | None = None
    primary_lon: float | None = None

    @property
    def features(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3_days, self.x4_km])


FEATURE_LABELS = ["primary_mag", "mate_mag", "dt_days", "dist_km"]


# -- catalog CSV --------------------------------------------------------------


def parse_time_utc(text: str) -> datetime:
    """ISO-8601 timestamp; 'Z' suffix or explicit offset; naive means UTC."""
    raw = text.strip()
    if raw.endswith("Z") or raw.endswith("z"):
        raw = raw[:-1] + "+00:00"
    t = datetime.fromisoformat(raw)
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    return t.astimezone(timezone.utc)


def format_time_utc(t: datetime) -> str:
    return t.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_catalog(source) -> list[SeismicEvent]:
    """Parse a catalog CSV into events sorted ascending by origin time.

    ``source`` is a path or a text file object. Raises
    CatalogFormatError naming the offending line for malformed rows,
    out-of-range coordinates or duplicate ids. An empty file yields an
    empty list.
    """
    if hasattr(source, "read"):
        return _parse_catalog_stream(source)
    with open(source, "r", encoding="utf-8", newline="") as fh:
        return _parse_catalog_stream(fh)


def _parse_catalog_stream(fh) -> list[SeismicEvent]:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        return []
    if [h.strip() for h in header] != CATALOG_HEADER:
        raise CatalogFormatError(
            f"line 1: expected header {','.join(CATALOG_HEADER)!r}, "
            f"got {','.join(header)!r}"
        )
    events = []
    seen = set()
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(CATALOG_HEADER):
            raise CatalogFormatError(
                f"line {lineno}: expected {len(CATALOG_HEADER)} fields, got {len(row)}"
            )
        ident, time_s, lat_s, lon_s, depth_s, mag_s = [f.strip() for f in row]
        try:
            origin = parse_time_utc(time_s)
            lat = float(lat_s)
            lon = float(lon_s)
            depth = float(depth_s) if depth_s else None
            mag = float(mag_s)
            event = SeismicEvent(
                id=ident, origin_time=origin, lat=lat, lon=lon,
                magnitude=mag, depth_km=depth,
            )
        except ValueError as exc:
            raise CatalogFormatError(f"line {lineno}: {exc}") from exc
        if ident in seen:
            raise CatalogFormatError(f"line {lineno}: duplicate event id {ident!r}")
        seen.add(ident)
        events.append(event)
    events.sort(key=lambda e: (e.origin_time, e.id))
    return events


# -- couple extraction ---------------------------------------------------------


def _require_sorted(events) -> None:
    for prev, cur in zip(events, events[1:]):
        if cur.origin_time < prev.origin_time:
            raise ValueError(
                f"events must be sorted ascending by origin time; "
                f"{cur.id!r} precedes {prev.id!r}"
            )


def extract_couples(events, config: CouplingConfig) -> list[CoupleRecord]:
    """Detect couples: for each strong event, its best earlier mate.

    A mate must itself reach the magnitude cut, must not follow the
    primary, and must lie within the time and distance gates. Among
    candidates the largest magnitude wins; ties fall to the smaller
    time separation, then the smaller distance, then the smaller id.
    Events without a qualifying mate yield no record. Output is ordered
    by primary event time.
    """
    events = list(events)
    _require_sorted(events)
    times = [e.epoch_seconds for e in events]
    max_dt_sec = config.max_dt_days * 86400.0
    couples = []
    for idx, e in enumerate(events):
        if e.magnitude < config.min_mag:
            continue
        te = times[idx]
        # conservative prefilter; the exact day-based gate is below
        lo = bisect_left(times, te - max_dt_sec - 1.0)
        hi = bisect_right(times, te)
        best = None
        best_key = None
        for k in range(lo, hi):
            m = events[k]
            if m is e or m.magnitude < config.min_mag:
                continue
            if m.origin_time > e.origin_time:
                continue
            dt_days = (te - times[k]) / 86400.0
            if dt_days > config.max_dt_days:
                continue
            dist = haversine_km(e.lat, e.lon, m.lat, m.lon)
            if dist > config.max_dist_km:
                continue
            key = (-m.magnitude, dt_days, dist, m.id)
            if best_key is None or key < best_key:
                best_key = key
                best = (m, dt_days, dist)
        if best is not None:
            mate, dt_days, dist = best
            couples.append(
                CoupleRecord(
                    primary_id=e.id,
                    mate_id=mate.id,
                    primary_time=e.origin_time,
                    x1=e.magnitude,
                    x2=mate.magnitude,
                    x3_days=dt_days,
                    x4_km=dist,
                    primary_lat=e.lat,
                    primary_lon=e.lon,
                )
            )
    return couples


def assign_targets(
    couples, events, config: CouplingConfig, target_radius_km: float | None = None
) -> list[CoupleRecord]:
    """Attach the look-ahead window maximum magnitude to each couple.

    The window is (primary_time, primary_time + horizon_days]; any
    event in it counts regardless of location unless
    ``target_radius_km`` restricts matches to a great-circle radius
    around the primary's epicenter. Records whose window holds no
    qualifying event keep ``target=None``. ``censored`` is set when the
    window extends beyond the catalog's last timestamp.
    """
    events = list(events)
    _require_sorted(events)
    by_id = {e.id: e for e in events}
    times = [e.epoch_seconds for e in events]
    last_time = times[-1] if times else -math.inf
    horizon_sec = config.horizon_days * 86400.0
    out = []
    for couple in couples:
        tp = couple.primary_time.timestamp()
        lo = bisect_right(times, tp)
        hi = bisect_right(times, tp + horizon_sec + 1.0)
        lat, lon = couple.primary_lat, couple.primary_lon
        if lat is None or lon is None:
            primary = by_id.get(couple.primary_id)
            if primary is not None:
                lat, lon = primary.lat, primary.lon
        if target_radius_km is not None and (lat is None or lon is None):
            raise ValueError(
                f"couple primary {couple.primary_id!r} has no epicenter and is "
                "not in the catalog; needed for the spatial target gate"
            )
        target = None
        for k in range(lo, hi):
            dt_days = (times[k] - tp) / 86400.0
            if not (0.0 < dt_days <= config.horizon_days):
                continue
            ev = events[k]
            if target_radius_km is not None:
                if haversine_km(lat, lon, ev.lat, ev.lon) > target_radius_km:
                    continue
            if target is None or ev.magnitude > target:
                target = ev.magnitude
        censored = tp + horizon_sec > last_time
        out.append(replace(couple, target=target, censored=censored))
    return out


def split_by_epoch(couples, train_before: datetime, test_range):
    """Chronological train/validation/test partition.

    Couples whose primary is strictly before ``train_before`` form the
    training pool, with the chronologically last fifth held out for
    validation. ``test_range`` is a half-open [start, end) interval;
    ``train_before`` must not exceed its start so no record lands in
    two partitions. An empty training partition is an error.
    """
    if train_before.tzinfo is None:
        train_before = train_before.replace(tzinfo=timezone.utc)
    start, end = test_range
    if start.tzinfo is None:
        start = start.replace(tzinfo=timezone.utc)
    if end.tzinfo is None:
        end = end.replace(tzinfo=timezone.utc)
    if not (train_before <= start < end):
        raise ValueError(
            "boundaries must satisfy train_before <= test_start < test_end"
        )
    pre = sorted(
        (c for c in couples if c.primary_time < train_before),
        key=lambda c: (c.primary_time, c.primary_id),
    )
    if not pre:
        raise ValueError("no couples before the training boundary; cannot train")
    n_val = len(pre) // 5
    train = pre[: len(pre) - n_val]
    validation = pre[len(pre) - n_val:]
    test = [c for c in couples if start <= c.primary_time < end]
    return train, validation, test


def training_arrays(couples):
    """Feature matrix and target vector of couples that have targets."""
    usable = [c for c in couples if c.target is not None]
    if not usable:
        return np.zeros((0, 4)), np.zeros(0)
    X = np.array([c.features for c in usable])
    y = np.array([c.target for c in usable])
    return X, y


# -- couples CSV ----------------------------------------------------------------


def write_couples_csv(couples, dest) -> None:
    """Write couples in the fixed export format (path or text file)."""
    if hasattr(dest, "write"):
        _write_couples_stream(couples, dest)
        return
    with open(dest, "w", encoding="utf-8", newline="") as fh:
        _write_couples_stream(couples, fh)


def _write_couples_stream(couples, fh) -> None:
    fh.write(",".join(COUPLES_HEADER) + "\n")
    for c in couples:
        target = "" if c.target is None else repr(float(c.target))
        fh.write(
            f"{c.primary_id},{c.mate_id},{c.x1!r},{c.x2!r},"
            f"{c.x3_days!r},{c.x4_km!r},{target},"
            f"{'true' if c.censored else 'false'}\n"
        )


def read_couples_csv(source, events) -> list[CoupleRecord]:
    """Read a couples CSV back, joining the catalog for primary times."""
    by_id = {e.id: e for e in events}
    if hasattr(source, "read"):
        fh = source
        return _read_couples_stream(fh, by_id)
    with open(source, "r", encoding="utf-8", newline="") as fh:
        return _read_couples_stream(fh, by_id)


def _read_couples_stream(fh, by_id) -> list[CoupleRecord]:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        return []
    if [h.strip() for h in header] != COUPLES_HEADER:
        raise CatalogFormatError(
            f"line 1: expected header {','.join(COUPLES_HEADER)!r}, "
            f"got {','.join(header)!r}"
        )
    couples = []
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(COUPLES_HEADER):
            raise CatalogFormatError(
                f"line {lineno}: expected {len(COUPLES_HEADER)} fields, got {len(row)}"
            )
        pid, mid, x1, x2, x3, x4, target_s, censored_s = [f.strip() for f in row]
        primary = by_id.get(pid)
        if primary is None:
            raise CatalogFormatError(
                f"line {lineno}: primary id {pid!r} not present in the catalog"
            )
        if censored_s not in ("true", "false"):
            raise CatalogFormatError(
                f"line {lineno}: censored must be 'true' or 'false', got {censored_s!r}"
            )
        try:
            couples.append(
                CoupleRecord(
                    primary_id=pid,
                    mate_id=mid,
                    primary_time=primary.origin_time,
                    x1=float(x1),
                    x2=float(x2),
                    x3_days=float(x3),
                    x4_km=float(x4),
                    target=float(target_s) if target_s else None,
                    censored=censored_s == "true",
                    primary_lat=primary.lat,
                    primary_lon=primary.lon,
                )
            )
        except ValueError as exc:
            raise CatalogFormatError(f"line {lineno}: {exc}") from exc
    return couples
