"""Objective validation of a fitted clustering framework, plus validity indices.

The objective strategy scores a whole framework (reducer + clusterer), not
just the clusterer: each household's days are shuffled and split into p
partitions, every partition is pushed through the same preprocessing and
the *same fitted* reducer, and assigned to the nearest fitted cluster
center.  A partition counts as a match when it lands on the household's
original label.  Averaging over repetitions gives

    pct_matches = avg_matches * 100 / (n * p)

A high match rate means the framework's clusters are stable under
resampling of the household's own days.  Neither the reducer nor the
centers are refitted here; that is the point of the strategy.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .cluster import ClusterModel
from .dimred import Reducer
from .errors import ConfigError, InputError, NumericalError
from .ingest import HouseholdSeries
from .preprocess import l2_normalize_rows
from .rng import Seed, seed_sequence, substream

DEFAULT_REPETITIONS = 100


@dataclass(frozen=True)
class ValidationReport:
    """Match/mismatch statistics from the partition-resampling strategy."""

    framework_label: str
    p: int
    repetitions: int
    avg_matches: float
    avg_mismatches: float
    pct_matches: float
    pct_mismatches: float
    per_household: dict[str, float]


@dataclass(frozen=True)
class CviScores:
    silhouette: float
    davies_bouldin: float
    calinski_harabasz: float


def matches_percentage(avg_matches: float, n_households: int, p: int) -> float:
    """pct_matches = avg_matches * 100 / (n * p)."""
    return avg_matches * 100.0 / (n_households * p)


def partition_days(day_matrix, p: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffle rows and split into p parts; the first (rows mod p) parts get one extra row."""
    day_matrix = np.asarray(day_matrix, dtype=float)
    if p < 1:
        raise ConfigError(f"p must be positive, got {p}")
    n_days = day_matrix.shape[0]
    if n_days < p:
        raise InputError(f"cannot make {p} partitions from {n_days} days")
    perm = rng.permutation(n_days)
    base, extra = divmod(n_days, p)
    parts = []
    start = 0
    for i in range(p):
        size = base + (1 if i < extra else 0)
        parts.append(day_matrix[perm[start : start + size]])
        start += size
    return parts


def _household_matches(
    day_matrix: np.ndarray,
    label: int,
    reducer: Reducer,
    centers: np.ndarray,
    p: int,
    rng: np.random.Generator,
    household_id: str,
) -> int:
    parts = partition_days(day_matrix, p, rng)
    medians = np.vstack([np.median(part, axis=0) for part in parts])
    try:
        normed = l2_normalize_rows(medians)
    except InputError as exc:
        raise InputError(f"household {household_id}: {exc}") from None
    reduced = reducer.transform(normed)
    d2 = ((reduced[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    assigned = d2.argmin(axis=1)  # ties toward the lower center index
    return int((assigned == label).sum())


def objective_validate(
    households: Mapping[str, HouseholdSeries],
    reducer: Reducer,
    model: ClusterModel,
    p: int,
    repetitions: int = DEFAULT_REPETITIONS,
    seed: Seed = 0,
    workers: int = 1,
) -> ValidationReport:
    """Run the partition-resampling validation for one fitted framework.

    ``model.labels`` must be aligned with the sorted-household-id row order
    used at fit time.  Each (repetition, household) pair consumes its own
    PRNG substream keyed (rep, household index), so any ``workers`` count
    reproduces the serial result bit-exactly.
    """
    if repetitions < 1:
        raise ConfigError(f"repetitions must be positive, got {repetitions}")
    if workers < 1:
        raise ConfigError(f"workers must be positive, got {workers}")
    ids = sorted(households)
    n = len(ids)
    if n != len(model.labels):
        raise InputError(
            f"model has {len(model.labels)} labels but data has {n} households; "
            "labels must align with the sorted-id ordering used at fit time"
        )
    day_counts = {hid: households[hid].day_matrix.shape[0] for hid in ids}
    for hid, n_days in day_counts.items():
        if n_days < p:
            raise InputError(f"household {hid}: p={p} exceeds its {n_days} complete days")
    tight = [hid for hid, n_days in day_counts.items() if p > n_days / 10]
    if tight:
        warnings.warn(
            f"p={p} is not much smaller than the day count for households {tight[:5]}; "
            "partition medians may be unstable",
            stacklevel=2,
        )

    root = seed_sequence(seed)
    labels = np.asarray(model.labels, dtype=int)
    matrices = [households[hid].day_matrix for hid in ids]

    def run_repetition(rep: int) -> np.ndarray:
        counts = np.empty(n, dtype=np.int64)
        for h, hid in enumerate(ids):
            rng = substream(root, rep, h)
            counts[h] = _household_matches(
                matrices[h], labels[h], reducer, model.centers, p, rng, hid
            )
        return counts

    if workers == 1:
        per_rep = [run_repetition(rep) for rep in range(repetitions)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_rep = list(pool.map(run_repetition, range(repetitions)))

    match_per_household = np.sum(per_rep, axis=0)
    total_matches = int(match_per_household.sum())
    total = n * p * repetitions
    avg_matches = total_matches / repetitions
    avg_mismatches = (total - total_matches) / repetitions
    return ValidationReport(
        framework_label=f"{reducer.kind}+{model.method}",
        p=p,
        repetitions=repetitions,
        avg_matches=avg_matches,
        avg_mismatches=avg_mismatches,
        pct_matches=matches_percentage(avg_matches, n, p),
        pct_mismatches=matches_percentage(avg_mismatches, n, p),
        per_household={
            hid: float(match_per_household[h] / (p * repetitions)) for h, hid in enumerate(ids)
        },
    )


def _check_labels(X, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    if labels.shape[0] != X.shape[0]:
        raise InputError(f"{labels.shape[0]} labels for {X.shape[0]} points")
    classes = np.unique(labels)
    if classes.size < 2:
        raise ConfigError(f"need at least 2 clusters, got {classes.size}")
    return X, labels, classes


def silhouette(X, labels) -> float:
    """Mean silhouette coefficient; singleton clusters contribute 0."""
    X, labels, classes = _check_labels(X, labels)
    n = X.shape[0]
    dist = np.sqrt(np.maximum(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2), 0.0))
    scores = np.zeros(n)
    for i in range(n):
        own = labels == labels[i]
        n_own = int(own.sum())
        if n_own == 1:
            continue  # singleton: contributes 0 by convention
        a = dist[i, own].sum() / (n_own - 1)
        b = min(dist[i, labels == c].mean() for c in classes if c != labels[i])
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return float(scores.mean())


def davies_bouldin(X, labels) -> float:
    """Mean over clusters of the worst (s_i + s_j) / d(mu_i, mu_j) ratio."""
    X, labels, classes = _check_labels(X, labels)
    centroids = np.vstack([X[labels == c].mean(axis=0) for c in classes])
    scatter = np.array(
        [
            float(np.sqrt(((X[labels == c] - centroids[i]) ** 2).sum(axis=1)).mean())
            for i, c in enumerate(classes)
        ]
    )
    k = classes.size
    sep = np.sqrt(((centroids[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2))
    worst = np.empty(k)
    for i in range(k):
        ratios = []
        for j in range(k):
            if i == j:
                continue
            if sep[i, j] == 0.0:
                raise NumericalError(
                    f"coincident centroids for clusters {classes[i]} and {classes[j]}"
                )
            ratios.append((scatter[i] + scatter[j]) / sep[i, j])
        worst[i] = max(ratios)
    return float(worst.mean())


def calinski_harabasz(X, labels) -> float:
    """Between/within dispersion ratio [trace_B/(k-1)] / [trace_W/(n-k)]."""
    X, labels, classes = _check_labels(X, labels)
    n, k = X.shape[0], classes.size
    if n <= k:
        raise ConfigError(f"need more points ({n}) than clusters ({k})")
    overall = X.mean(axis=0)
    trace_w = 0.0
    trace_b = 0.0
    for c in classes:
        members = X[labels == c]
        mu = members.mean(axis=0)
        trace_w += float(((members - mu) ** 2).sum())
        trace_b += members.shape[0] * float(((mu - overall) ** 2).sum())
    if trace_w == 0.0:
        raise NumericalError("zero within-cluster dispersion: index is unbounded")
    return float((trace_b / (k - 1)) / (trace_w / (n - k)))


def cvi_scores(X, labels) -> CviScores:
    """All three supplementary validity indices on the same geometry."""
    return CviScores(
        silhouette=silhouette(X, labels),
        davies_bouldin=davies_bouldin(X, labels),
        calinski_harabasz=calinski_harabasz(X, labels),
    )


def report_to_dict(report: ValidationReport) -> dict:
    return {
        "framework": report.framework_label,
        "p": report.p,
        "repetitions": report.repetitions,
        "avg_matches": report.avg_matches,
        "avg_mismatches": report.avg_mismatches,
        "pct_matches": report.pct_matches,
        "pct_mismatches": report.pct_mismatches,
        "per_household": report.per_household,
    }


def save_report(path, report: ValidationReport) -> None:
    Path(path).write_text(json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n")


def write_comparison_csv(
    path_or_file, rows: Iterable[tuple[ValidationReport, CviScores | None]]
) -> None:
    """Comparison table across frameworks: one row per (framework, p)."""

    def _write(stream) -> None:
        stream.write(
            "framework,p,pct_matches,pct_mismatches,"
            "silhouette,davies_bouldin,calinski_harabasz\n"
        )
        for report, cvi in rows:
            cvi_cols = (
                f"{cvi.silhouette!r},{cvi.davies_bouldin!r},{cvi.calinski_harabasz!r}"
                if cvi is not None
                else ",,"
            )
            stream.write(
                f"{report.framework_label},{report.p},"
                f"{report.pct_matches!r},{report.pct_mismatches!r},{cvi_cols}\n"
            )

    if isinstance(path_or_file, (str, Path)):
        with open(path_or_file, "w", encoding="utf-8", newline="") as stream:
            _write(stream)
    else:
        _write(path_or_file)
