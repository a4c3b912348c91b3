"""Parsing of raw smart-meter CSV data into per-household day matrices.

Input contract: UTF-8 CSV with header ``household_id,timestamp,kwh``, one
reading per row, ISO-8601 timestamps truncated to the hour, ``.`` decimal
separator.  Days with any missing slot are dropped whole (a median over
ragged columns would bias per-slot statistics), and households that retain
fewer than ``min_complete_days`` complete days are excluded and reported.

Timestamps are taken as local wall clock.  A spring-forward gap therefore
shows up as a missing slot and drops that day; a fall-back hour would
present as a duplicate reading, which is rejected as an error because it
is indistinguishable from data corruption in this schema.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigError, InputError

READINGS_HEADER = ("household_id", "timestamp", "kwh")
EXCLUSIONS_HEADER = ("household_id", "reason", "n_complete_days")
DEFAULT_MIN_COMPLETE_DAYS = 10


@dataclass(frozen=True)
class MeterReading:
    """One consumption record: household, calendar day, slot index, kWh."""

    household_id: str
    day: date
    slot: int
    kwh: float


@dataclass(frozen=True)
class HouseholdSeries:
    """A household's retained complete days as a (days x 24/r) kWh matrix."""

    household_id: str
    day_matrix: np.ndarray
    n_days_dropped: int


@dataclass(frozen=True)
class ExclusionRecord:
    household_id: str
    reason: str
    n_complete_days: int


def slots_per_day(resolution_hours: int) -> int:
    """Number of slots in a day for an r-hour resolution; r must divide 24."""
    r = int(resolution_hours)
    if r < 1 or 24 % r != 0:
        raise ConfigError(f"resolution_hours must be a positive divisor of 24, got {resolution_hours}")
    return 24 // r


def _open_text(csv_source):
    """Return (text stream, needs_close) for a path, bytes, or file object."""
    if isinstance(csv_source, (str, Path)):
        return open(csv_source, "r", encoding="utf-8", newline=""), True
    if isinstance(csv_source, bytes):
        return io.StringIO(csv_source.decode("utf-8")), False
    if isinstance(csv_source, io.TextIOBase):
        return csv_source, False
    # binary file-like
    return io.TextIOWrapper(csv_source, encoding="utf-8", newline=""), False


def parse_readings(csv_source, resolution_hours: int = 1) -> list[MeterReading]:
    """Parse a readings CSV into MeterReadings, preserving file order.

    Raises InputError naming the line number on the first malformed row
    (bad field count, unparseable or non-hour-aligned timestamp, negative
    or non-finite energy).
    """
    d = slots_per_day(resolution_hours)
    r = int(resolution_hours)
    stream, needs_close = _open_text(csv_source)
    readings: list[MeterReading] = []
    try:
        reader = csv.reader(stream)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != READINGS_HEADER:
            raise InputError(
                f"expected header {','.join(READINGS_HEADER)!r}, got {header!r}"
            )
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != 3:
                raise InputError(f"line {line}: expected 3 fields, got {len(row)}")
            household_id, ts_text, kwh_text = (field.strip() for field in row)
            if not household_id:
                raise InputError(f"line {line}: empty household_id")
            try:
                ts = datetime.fromisoformat(ts_text)
            except ValueError:
                raise InputError(f"line {line}: malformed timestamp {ts_text!r}") from None
            if ts.minute or ts.second or ts.microsecond:
                raise InputError(f"line {line}: timestamp {ts_text!r} not truncated to the hour")
            if ts.hour % r != 0:
                raise InputError(
                    f"line {line}: timestamp {ts_text!r} not aligned to {r}-hour resolution"
                )
            try:
                kwh = float(kwh_text)
            except ValueError:
                raise InputError(f"line {line}: malformed kwh value {kwh_text!r}") from None
            if not np.isfinite(kwh):
                raise InputError(f"line {line}: non-finite kwh value {kwh_text!r}")
            if kwh < 0:
                raise InputError(f"line {line}: negative energy {kwh}")
            readings.append(MeterReading(household_id, ts.date(), ts.hour // r, kwh))
    finally:
        if needs_close:
            stream.close()
    return readings


def build_day_matrices(
    readings: Iterable[MeterReading],
    resolution_hours: int = 1,
    min_complete_days: int = DEFAULT_MIN_COMPLETE_DAYS,
) -> tuple[dict[str, HouseholdSeries], list[ExclusionRecord]]:
    """Group readings into per-household day matrices of complete days.

    Returns the retained households (rows ordered by ascending date) plus an
    exclusion report for households below ``min_complete_days``.  Duplicate
    (household, day, slot) entries and an empty result are errors.
    """
    d = slots_per_day(resolution_hours)
    if min_complete_days < 1:
        raise ConfigError(f"min_complete_days must be positive, got {min_complete_days}")

    per_household: dict[str, dict[date, dict[int, float]]] = {}
    for reading in readings:
        if not 0 <= reading.slot < d:
            raise InputError(
                f"household {reading.household_id}, day {reading.day}: "
                f"slot {reading.slot} out of range for {d} slots/day"
            )
        if reading.kwh < 0:
            raise InputError(
                f"household {reading.household_id}, day {reading.day}, "
                f"slot {reading.slot}: negative energy {reading.kwh}"
            )
        slots = per_household.setdefault(reading.household_id, {}).setdefault(reading.day, {})
        if reading.slot in slots:
            raise InputError(
                f"duplicate reading for household {reading.household_id}, "
                f"day {reading.day}, slot {reading.slot}"
            )
        slots[reading.slot] = reading.kwh

    series: dict[str, HouseholdSeries] = {}
    exclusions: list[ExclusionRecord] = []
    for household_id in sorted(per_household):
        days = per_household[household_id]
        complete = sorted(day for day, slots in days.items() if len(slots) == d)
        n_dropped = len(days) - len(complete)
        if len(complete) < min_complete_days:
            exclusions.append(
                ExclusionRecord(household_id, "insufficient_complete_days", len(complete))
            )
            continue
        matrix = np.array([[days[day][s] for s in range(d)] for day in complete], dtype=float)
        series[household_id] = HouseholdSeries(household_id, matrix, n_dropped)
    if not series:
        raise InputError("no household retained the minimum number of complete days")
    return series, exclusions


def series_to_readings(
    series: HouseholdSeries,
    resolution_hours: int = 1,
    start_day: date = date(2018, 1, 1),
) -> list[MeterReading]:
    """Expand a day matrix back to readings on consecutive days from ``start_day``."""
    d = slots_per_day(resolution_hours)
    if series.day_matrix.shape[1] != d:
        raise InputError(
            f"day matrix has {series.day_matrix.shape[1]} slots, expected {d}"
        )
    out = []
    for i, row in enumerate(series.day_matrix):
        day = start_day + timedelta(days=i)
        for s in range(d):
            out.append(MeterReading(series.household_id, day, s, float(row[s])))
    return out


def write_readings_csv(path_or_file, readings: Iterable[MeterReading], resolution_hours: int = 1) -> None:
    """Write readings in the input CSV schema (timestamps at slot start hours)."""
    r = int(resolution_hours)
    slots_per_day(resolution_hours)

    def _write(stream) -> None:
        stream.write(",".join(READINGS_HEADER) + "\n")
        for reading in readings:
            ts = f"{reading.day.isoformat()}T{reading.slot * r:02d}:00"
            stream.write(f"{reading.household_id},{ts},{reading.kwh!r}\n")

    if isinstance(path_or_file, (str, Path)):
        with open(path_or_file, "w", encoding="utf-8", newline="") as stream:
            _write(stream)
    else:
        _write(path_or_file)


def write_exclusions_csv(path_or_file, exclusions: Iterable[ExclusionRecord]) -> None:
    """Write the exclusion report CSV ``household_id,reason,n_complete_days``."""

    def _write(stream) -> None:
        stream.write(",".join(EXCLUSIONS_HEADER) + "\n")
        for record in exclusions:
            stream.write(f"{record.household_id},{record.reason},{record.n_complete_days}\n")

    if isinstance(path_or_file, (str, Path)):
        with open(path_or_file, "w", encoding="utf-8", newline="") as stream:
            _write(stream)
    else:
        _write(path_or_file)
