"""Alarm scoring: run a trained system over couples and match the
predicted windows against the catalog.

An alarm is anchored at a couple's primary event and predicts the
magnitude of an event inside the look-ahead window. For a report
threshold tau, an alarm is issued when its predicted magnitude reaches
tau; an issued alarm is a hit when some event of magnitude >= tau falls
inside its window (start exclusive, end inclusive) and a false alarm
otherwise. An event >= tau that no issued alarm's window covers is a
miss.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from .catalog import format_time_utc, haversine_km, parse_time_utc
from .fuzzy import FuzzyInferenceSystem, NoRuleFiresError


@dataclass(frozen=True)
class AlarmRecord:
    """One 6-month-style alarm: anchor time, predicted magnitude and
    window length; ``target`` carries the couple's observed window
    maximum when known (used for magnitude RMSE), ``lat``/``lon`` the
    anchor epicenter for the optional spatial match gate."""

    primary_id: str
    alarm_time: datetime
    predicted_mag: float
    horizon_days: float
    target: float | None = None
    lat: float | None = None
    lon: float | None = None

    @property
    def window_end(self) -> datetime:
        return self.alarm_time + timedelta(days=self.horizon_days)


@dataclass(frozen=True)
class EvaluationRow:
    threshold: float
    alarms_issued: int
    false_alarms: int
    hits: int
    missed: int

    @property
    def false_alarm_rate(self) -> float | None:
        if self.alarms_issued == 0:
            return None
        return self.false_alarms / self.alarms_issued


@dataclass
class EvaluationReport:
    """Per-threshold alarm counts plus the threshold-independent
    magnitude RMSE over predicted couples with known targets."""

    rows: list
    rmse: float | None
    n_predicted: int
    n_with_target: int
    n_skipped: int

    def to_csv_string(self) -> str:
        lines = ["threshold,alarms,false_alarms,hits,missed,false_alarm_rate,rmse"]
        rmse = "" if self.rmse is None else repr(self.rmse)
        for r in self.rows:
            rate = "" if r.false_alarm_rate is None else repr(r.false_alarm_rate)
            lines.append(
                f"{r.threshold!r},{r.alarms_issued},{r.false_alarms},"
                f"{r.hits},{r.missed},{rate},{rmse}"
            )
        return "\n".join(lines) + "\n"

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv_string())

    def to_text(self) -> str:
        lines = [
            f"couples predicted : {self.n_predicted}",
            f"with known target : {self.n_with_target}",
            f"skipped (no rule fires): {self.n_skipped}",
            "magnitude RMSE    : "
            + ("n/a" if self.rmse is None else f"{self.rmse:.4f}"),
            "",
            f"{'threshold':>9}  {'alarms':>6}  {'false':>5}  {'hits':>4}  "
            f"{'missed':>6}  {'false rate':>10}",
        ]
        for r in self.rows:
            rate = "n/a" if r.false_alarm_rate is None else f"{r.false_alarm_rate:.3f}"
            lines.append(
                f"{r.threshold:>9.2f}  {r.alarms_issued:>6}  {r.false_alarms:>5}  "
                f"{r.hits:>4}  {r.missed:>6}  {rate:>10}"
            )
        return "\n".join(lines) + "\n"


def predict_couples(fis: FuzzyInferenceSystem, couples, horizon_days: float):
    """One alarm per couple; couples firing no rule are returned
    separately, never silently dropped.

    Returns (alarms, skipped_couples)."""
    alarms = []
    skipped = []
    for c in couples:
        try:
            z = fis.infer(c.features)
        except NoRuleFiresError:
            skipped.append(c)
            continue
        alarms.append(
            AlarmRecord(
                primary_id=c.primary_id,
                alarm_time=c.primary_time,
                predicted_mag=z,
                horizon_days=horizon_days,
                target=c.target,
                lat=c.primary_lat,
                lon=c.primary_lon,
            )
        )
    return alarms, skipped


def _in_window(alarm: AlarmRecord, t_seconds: float, alarm_seconds: float) -> bool:
    dt_days = (t_seconds - alarm_seconds) / 86400.0
    return 0.0 < dt_days <= alarm.horizon_days


def _covers(alarm, event, t_seconds, alarm_seconds, match_radius_km) -> bool:
    if not _in_window(alarm, t_seconds, alarm_seconds):
        return False
    if match_radius_km is None:
        return True
    if alarm.lat is None or alarm.lon is None:
        raise ValueError(
            f"alarm {alarm.primary_id!r} has no epicenter; cannot apply the "
            "spatial match gate"
        )
    return haversine_km(alarm.lat, alarm.lon, event.lat, event.lon) <= match_radius_km


def score_alarms(alarms, events, tau: float, period=None, match_radius_km=None) -> EvaluationRow:
    """Count issued/false/hit alarms and missed events at threshold tau.

    ``period`` optionally restricts which events can be counted as
    missed (a half-open [start, end) interval); hit matching always
    uses the full event list so windows may extend past the period.
    ``match_radius_km`` optionally adds a spatial gate around the alarm
    epicenter (default: time only).
    """
    if not math.isfinite(tau):
        raise ValueError(f"threshold must be finite, got {tau}")
    events = list(events)
    times = [e.epoch_seconds for e in events]
    for prev, cur in zip(times, times[1:]):
        if cur < prev:
            raise ValueError("events must be sorted ascending by origin time")

    issued = [a for a in alarms if a.predicted_mag >= tau]
    hits = 0
    for a in issued:
        ta = a.alarm_time.timestamp()
        lo = bisect_right(times, ta)
        hi = bisect_right(times, ta + a.horizon_days * 86400.0 + 1.0)
        if any(
            events[k].magnitude >= tau
            and _covers(a, events[k], times[k], ta, match_radius_km)
            for k in range(lo, hi)
        ):
            hits += 1
    false_alarms = len(issued) - hits

    if period is not None:
        start, end = period
        if start.tzinfo is None:
            start = start.replace(tzinfo=timezone.utc)
        if end.tzinfo is None:
            end = end.replace(tzinfo=timezone.utc)
        eligible = [e for e in events if start <= e.origin_time < end]
    else:
        eligible = events
    missed = 0
    for e in eligible:
        if e.magnitude < tau:
            continue
        ts = e.epoch_seconds
        if not any(
            _covers(a, e, ts, a.alarm_time.timestamp(), match_radius_km)
            for a in issued
        ):
            missed += 1

    return EvaluationRow(
        threshold=float(tau),
        alarms_issued=len(issued),
        false_alarms=false_alarms,
        hits=hits,
        missed=missed,
    )


def build_report(
    alarms, events, thresholds, period=None, match_radius_km=None, n_skipped=0
) -> EvaluationReport:
    """Score every threshold (ascending) and attach the magnitude RMSE."""
    rows = [
        score_alarms(alarms, events, t, period=period, match_radius_km=match_radius_km)
        for t in sorted(thresholds)
    ]
    with_target = [a for a in alarms if a.target is not None]
    rmse = None
    if with_target:
        err = np.array([a.predicted_mag - a.target for a in with_target])
        rmse = float(np.sqrt(np.mean(err**2)))
    return EvaluationReport(
        rows=rows,
        rmse=rmse,
        n_predicted=len(alarms),
        n_with_target=len(with_target),
        n_skipped=n_skipped,
    )


# -- plot data -------------------------------------------------------------


@dataclass(frozen=True)
class PlotRow:
    time: datetime
    series: str  # "actual" or "predicted"
    magnitude: float


def emit_plot_data(alarms, events, start: datetime, end: datetime) -> list[PlotRow]:
    """Interleave observed events and predictions for plotting.

    Events become the "actual" series at their origin times; alarms
    become the "predicted" series at their anchor times. Rows are
    limited to the half-open [start, end) range and sorted by time
    (series name, then magnitude break ties deterministically).
    """
    if start.tzinfo is None:
        start = start.replace(tzinfo=timezone.utc)
    if end.tzinfo is None:
        end = end.replace(tzinfo=timezone.utc)
    rows = [
        PlotRow(e.origin_time, "actual", e.magnitude)
        for e in events
        if start <= e.origin_time < end
    ]
    rows += [
        PlotRow(a.alarm_time, "predicted", a.predicted_mag)
        for a in alarms
        if start <= a.alarm_time < end
    ]
    rows.sort(key=lambda r: (r.time, r.series, r.magnitude))
    return rows


def plot_rows_to_csv_string(rows) -> str:
    lines = ["time,series,magnitude"]
    for r in rows:
        lines.append(f"{format_time_utc(r.time)},{r.series},{r.magnitude!r}")
    return "\n".join(lines) + "\n"


def read_plot_csv_string(text: str) -> list[PlotRow]:
    lines = text.splitlines()
    if not lines or lines[0] != "time,series,magnitude":
        raise ValueError("expected header 'time,series,magnitude'")
    rows = []
    for line in lines[1:]:
        if not line.strip():
            continue
        time_s, series, mag_s = line.split(",")
        rows.append(PlotRow(parse_time_utc(time_s), series, float(mag_s)))
    return rows
