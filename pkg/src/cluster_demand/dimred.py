"""Dimensionality reduction: PCA and feature agglomeration, plus elbow selection.

Both reducers are deterministic transforms fitted on the profile matrix.
Determinism matters beyond reproducibility: the validation strategy
re-projects freshly partitioned household trends through the *same* fitted
reducer, so ``transform`` must give bit-identical output for identical
input.

PCA centers columns by the training mean and projects onto the top
eigenvectors of the covariance matrix; explained-variance ratios are the
l1-normalized eigenvalues.  Feature agglomeration merges feature columns
bottom-up under Ward's criterion until the next merge distance exceeds the
threshold, and pools each surviving group by arithmetic mean.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from scipy.cluster.hierarchy import linkage

from . import numeric
from .errors import ConfigError, InputError, NumericalError
from .preprocess import ProfileMatrix


@dataclass(frozen=True)
class PCAReducer:
    """Fitted PCA projection: training mean, d x d' eigenvector basis, EVR/CEVR."""

    mean: np.ndarray
    projection: np.ndarray
    evr: np.ndarray
    cevr: np.ndarray

    kind = "PCA"

    @property
    def n_components(self) -> int:
        return self.projection.shape[1]

    def transform(self, rows) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.shape[1] != self.mean.shape[0]:
            raise InputError(
                f"rows have {rows.shape[1]} columns, reducer was fitted on {self.mean.shape[0]}"
            )
        return (rows - self.mean) @ self.projection


@dataclass(frozen=True)
class FAReducer:
    """Fitted feature agglomeration: disjoint feature groups pooled by mean."""

    groups: tuple[tuple[int, ...], ...]
    threshold: float
    merge_trace: tuple[tuple[int, int, float], ...]
    n_features: int

    kind = "FA"

    @property
    def n_components(self) -> int:
        return len(self.groups)

    def transform(self, rows) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.shape[1] != self.n_features:
            raise InputError(
                f"rows have {rows.shape[1]} columns, reducer was fitted on {self.n_features}"
            )
        out = np.empty((rows.shape[0], len(self.groups)))
        for j, group in enumerate(self.groups):
            out[:, j] = rows[:, list(group)].mean(axis=1)
        return out


Reducer = Union[PCAReducer, FAReducer]


@dataclass(frozen=True)
class ReducedMatrix:
    """Profile matrix projected to d' dimensions, rows still id-aligned."""

    matrix: np.ndarray
    household_ids: tuple[str, ...]
    reducer_kind: str


def _as_matrix(profiles) -> np.ndarray:
    matrix = profiles.matrix if isinstance(profiles, ProfileMatrix) else profiles
    return np.asarray(matrix, dtype=float)


def _sorted_eigenvalues(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    eig = numeric.sym_eigen(numeric.covariance(M))
    values = np.maximum(eig.eigenvalues, 0.0)  # clip fp noise below zero
    return values, eig.eigenvectors


def pca_fit(profiles, n_components: int) -> PCAReducer:
    """Fit PCA with ``n_components`` retained eigenvectors (1 <= d' <= d)."""
    M = _as_matrix(profiles)
    d = M.shape[1]
    if not 1 <= n_components <= d:
        raise ConfigError(f"n_components must be in [1, {d}], got {n_components}")
    values, vectors = _sorted_eigenvalues(M)
    total = values.sum()
    if total <= 0.0:
        raise NumericalError("zero total variance: all profiles are identical")
    evr = values / total
    return PCAReducer(
        mean=M.mean(axis=0),
        projection=vectors[:, :n_components].copy(),
        evr=evr,
        cevr=np.cumsum(evr),
    )


def cevr_curve(profiles) -> list[tuple[int, float]]:
    """(candidate d', cumulative explained variance ratio) over descending eigenvalues."""
    M = _as_matrix(profiles)
    values, _ = _sorted_eigenvalues(M)
    total = values.sum()
    if total <= 0.0:
        raise NumericalError("zero total variance: all profiles are identical")
    cevr = np.cumsum(values / total)
    return [(i + 1, float(c)) for i, c in enumerate(cevr)]


def _ward_linkage(M: np.ndarray) -> tuple[tuple[int, int, float], ...]:
    # cluster the feature *columns*: observations for the linkage are M.T rows
    d = M.shape[1]
    if d < 2:
        raise InputError(f"need at least 2 feature columns, got {d}")
    Z = linkage(M.T, method="ward")
    return tuple((int(a), int(b), float(dist)) for a, b, dist, _ in Z)


def _groups_at_threshold(
    merge_trace: Sequence[tuple[int, int, float]], d: int, threshold: float
) -> tuple[tuple[int, ...], ...]:
    members: dict[int, list[int]] = {j: [j] for j in range(d)}
    for i, (a, b, dist) in enumerate(merge_trace):
        if dist > threshold:
            break
        members[d + i] = members.pop(a) + members.pop(b)
    groups = sorted((tuple(sorted(g)) for g in members.values()), key=lambda g: g[0])
    return tuple(groups)


def fa_fit(profiles, threshold: float) -> FAReducer:
    """Merge feature columns under Ward's criterion while merge distance <= threshold."""
    if threshold < 0:
        raise ConfigError(f"threshold must be non-negative, got {threshold}")
    M = _as_matrix(profiles)
    d = M.shape[1]
    trace = _ward_linkage(M)
    return FAReducer(
        groups=_groups_at_threshold(trace, d, threshold),
        threshold=float(threshold),
        merge_trace=trace,
        n_features=d,
    )


def fa_threshold_curve(profiles, thresholds: Sequence[float]) -> list[tuple[float, int]]:
    """(threshold, resulting d') for each threshold; d' is non-increasing.

    One Ward linkage is computed and reused for every threshold, which is
    equivalent to an fa_fit per threshold.
    """
    thresholds = [float(t) for t in thresholds]
    if any(b < a for a, b in zip(thresholds, thresholds[1:])):
        raise ConfigError("thresholds must be sorted ascending")
    M = _as_matrix(profiles)
    d = M.shape[1]
    trace = _ward_linkage(M)
    distances = np.array([dist for _, _, dist in trace])
    return [(t, int(d - np.count_nonzero(distances <= t))) for t in thresholds]


def fa_merge_thresholds(profiles) -> list[float]:
    """Candidate thresholds for the elbow curve: 0 plus each distinct merge distance."""
    trace = _ward_linkage(_as_matrix(profiles))
    return sorted({0.0} | {dist for _, _, dist in trace})


def transform(reducer: Reducer, rows) -> np.ndarray:
    """Apply a fitted reducer to rows with d columns (deterministic)."""
    return reducer.transform(rows)


def reduce_profiles(reducer: Reducer, profiles: ProfileMatrix) -> ReducedMatrix:
    """Transform a whole profile matrix, keeping household alignment."""
    return ReducedMatrix(reducer.transform(profiles.matrix), profiles.household_ids, reducer.kind)


def elbow_point(xs: Sequence[float], ys: Sequence[float]) -> int:
    """Index of the elbow of a monotone curve.

    The elbow is the point with maximum perpendicular distance to the chord
    joining the first and last points; ties break toward the smaller index.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ConfigError(f"xs and ys must be 1-D and equal length, got {x.shape} vs {y.shape}")
    if x.size < 3:
        raise ConfigError(f"elbow detection needs at least 3 points, got {x.size}")
    dy = np.diff(y)
    if not (np.all(dy >= 0) or np.all(dy <= 0)):
        raise ConfigError("curve is not monotone")
    cx, cy = x[-1] - x[0], y[-1] - y[0]
    chord = np.hypot(cx, cy)
    if chord == 0.0:
        return 0
    dist = np.abs(cy * (x - x[0]) - cx * (y - y[0])) / chord
    return int(np.argmax(dist))


def reducer_to_dict(reducer: Reducer) -> dict:
    """JSON-ready description of a fitted reducer."""
    if isinstance(reducer, PCAReducer):
        return {
            "kind": "PCA",
            "mean": reducer.mean.tolist(),
            "projection": reducer.projection.tolist(),
            "evr": reducer.evr.tolist(),
            "cevr": reducer.cevr.tolist(),
        }
    if isinstance(reducer, FAReducer):
        return {
            "kind": "FA",
            "groups": [list(g) for g in reducer.groups],
            "threshold": reducer.threshold,
            "merge_trace": [[a, b, dist] for a, b, dist in reducer.merge_trace],
            "n_features": reducer.n_features,
        }
    raise InputError(f"unknown reducer type {type(reducer).__name__}")


def reducer_from_dict(doc: dict) -> Reducer:
    kind = doc.get("kind")
    if kind == "PCA":
        return PCAReducer(
            mean=np.array(doc["mean"], dtype=float),
            projection=np.array(doc["projection"], dtype=float),
            evr=np.array(doc["evr"], dtype=float),
            cevr=np.array(doc["cevr"], dtype=float),
        )
    if kind == "FA":
        return FAReducer(
            groups=tuple(tuple(int(j) for j in g) for g in doc["groups"]),
            threshold=float(doc["threshold"]),
            merge_trace=tuple((int(a), int(b), float(dist)) for a, b, dist in doc["merge_trace"]),
            n_features=int(doc["n_features"]),
        )
    raise InputError(f"unknown reducer kind {kind!r}")


def save_reducer(path, reducer: Reducer) -> None:
    Path(path).write_text(json.dumps(reducer_to_dict(reducer), indent=2, sort_keys=True) + "\n")


def load_reducer(path) -> Reducer:
    return reducer_from_dict(json.loads(Path(path).read_text()))
