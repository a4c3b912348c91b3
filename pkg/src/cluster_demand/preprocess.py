"""Median daily profiles with row-wise l2 normalization.

Each household is summarized by the per-slot median over its retained days
(the median shrugs off the many outlier days in live meter data, which
would drag a mean), then every profile row is scaled to unit Euclidean
norm so that clustering sees consumption *shape*, not absolute magnitude.
Households are ordered by sorted id to make row order deterministic.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import InputError
from .ingest import HouseholdSeries, slots_per_day


@dataclass(frozen=True)
class ProfileMatrix:
    """n x d matrix of unit-norm median daily profiles, rows aligned with ids."""

    matrix: np.ndarray
    household_ids: tuple[str, ...]

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def d(self) -> int:
        return self.matrix.shape[1]


def median_daily_profile(series: HouseholdSeries) -> np.ndarray:
    """Per-slot median over all retained days of one household.

    Even day counts use the mean of the two middle order statistics.
    """
    if series.day_matrix.size == 0 or series.day_matrix.shape[0] == 0:
        raise InputError(f"household {series.household_id}: empty day matrix")
    return np.median(series.day_matrix, axis=0)


def l2_normalize_rows(M) -> np.ndarray:
    """Divide each row by its Euclidean norm; zero rows raise InputError."""
    M = np.asarray(M, dtype=float)
    norms = np.sqrt((M * M).sum(axis=1))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise InputError(f"row {zero[0]} is the zero vector and cannot be l2-normalized")
    return M / norms[:, None]


def normalize_rows(M, household_ids: Sequence[str]) -> ProfileMatrix:
    """Row-wise l2 normalization into a ProfileMatrix; names the household on zero rows."""
    M = np.asarray(M, dtype=float)
    ids = tuple(household_ids)
    if M.shape[0] != len(ids):
        raise InputError(f"{M.shape[0]} rows but {len(ids)} household ids")
    norms = np.sqrt((M * M).sum(axis=1))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise InputError(
            f"household {ids[zero[0]]}: all-zero median profile cannot be l2-normalized"
        )
    return ProfileMatrix(M / norms[:, None], ids)


def preprocess(households: Mapping[str, HouseholdSeries], resolution_hours: int = 1) -> ProfileMatrix:
    """Median daily profile per household, then row-wise l2 normalization.

    Rows are ordered by sorted household id.  Requires at least two
    households (a single profile cannot be clustered downstream).
    """
    d = slots_per_day(resolution_hours)
    ids = sorted(households)
    if len(ids) < 2:
        raise InputError(f"need at least 2 households, got {len(ids)}")
    rows = []
    for household_id in ids:
        series = households[household_id]
        if series.day_matrix.shape[1] != d:
            raise InputError(
                f"household {household_id}: day matrix has {series.day_matrix.shape[1]} "
                f"slots, expected {d}"
            )
        rows.append(median_daily_profile(series))
    return normalize_rows(np.vstack(rows), ids)


def write_profiles_csv(path_or_file, profiles: ProfileMatrix) -> None:
    """Dump the profile matrix as ``household_id`` plus one column per slot."""
    header = ["household_id"] + [f"s{j:02d}" for j in range(profiles.d)]

    def _write(stream) -> None:
        stream.write(",".join(header) + "\n")
        for household_id, row in zip(profiles.household_ids, profiles.matrix):
            stream.write(household_id + "," + ",".join(repr(float(v)) for v in row) + "\n")

    if isinstance(path_or_file, (str, Path)):
        with open(path_or_file, "w", encoding="utf-8", newline="") as stream:
            _write(stream)
    else:
        _write(path_or_file)


def read_profiles_csv(path) -> ProfileMatrix:
    """Re-read a profile matrix written by :func:`write_profiles_csv`."""
    with open(path, "r", encoding="utf-8", newline="") as stream:
        reader = csv.reader(stream)
        header = next(reader, None)
        if not header or header[0] != "household_id":
            raise InputError(f"{path}: not a profile matrix CSV")
        ids = []
        rows = []
        for row in reader:
            if not row:
                continue
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    if not ids:
        raise InputError(f"{path}: empty profile matrix CSV")
    return ProfileMatrix(np.array(rows, dtype=float), tuple(ids))
