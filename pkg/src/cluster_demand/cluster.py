"""Unsupervised clustering in reduced space: k-means, spectral, gap statistic.

k-means is plain Lloyd iteration, restarted ``n_init`` times from k distinct
data points sampled without replacement; the best run by inertia wins.
Spectral clustering builds a binary k-nearest-neighbour affinity graph
(union symmetrization), embeds with the eigenvectors of the unnormalized
Laplacian L = D - A for the k smallest eigenvalues, and k-means the
embedding rows.  Spectral centers are then recomputed as per-cluster means
of the *reduced-space* points, because the validation strategy measures
nearest-center distances in that space, not in the embedding.

The number of clusters is selected by the gap statistic against uniform
reference draws over the bounding box of the data, taking the k with the
highest gap (ties to the smaller k).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, InputError, NumericalError
from .numeric import sym_eigen
from .rng import Seed, seed_sequence, subseed, substream

DEFAULT_N_INIT = 10
DEFAULT_MAX_ITER = 300
DEFAULT_TOL = 1e-6
DEFAULT_GAP_B = 50

#: Floor for within-cluster dispersion before taking logs in the gap
#: statistic, so a perfect (zero-dispersion) clustering stays finite.
_LOG_FLOOR = np.finfo(float).tiny


@dataclass(frozen=True)
class ClusterModel:
    """k cluster centers in reduced space plus per-sample labels."""

    k: int
    centers: np.ndarray
    labels: np.ndarray
    inertia: float
    method: str  # "KMC" | "SC"


@dataclass(frozen=True)
class GapResult:
    """Gap statistic per candidate k and the selected cluster count."""

    k_values: tuple[int, ...]
    gap: np.ndarray
    sk: np.ndarray
    chosen_k: int


#: A clusterer maps (points, k, seed) to a ClusterModel.
Clusterer = Callable[[np.ndarray, int, Seed], ClusterModel]


def _assign(X: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-center labels (ties to the lower index) and squared distances."""
    d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1), d2


def _repair_empty(X: np.ndarray, labels: np.ndarray, centers: np.ndarray, k: int) -> np.ndarray:
    """Fill each empty cluster with the point farthest from its current center."""
    labels = labels.copy()
    counts = np.bincount(labels, minlength=k)
    empties = np.flatnonzero(counts == 0)
    if empties.size == 0:
        return labels
    d2 = ((X - centers[labels]) ** 2).sum(axis=1)
    for c in empties:
        movable = counts[labels] >= 2
        if not movable.any():
            break  # k == n and all singletons; nothing can move
        scores = np.where(movable, d2, -1.0)
        j = int(np.argmax(scores))
        counts[labels[j]] -= 1
        labels[j] = c
        counts[c] += 1
        d2[j] = 0.0
    return labels


def _class_means(X: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    return np.vstack([X[labels == c].mean(axis=0) for c in range(k)])


def _lloyd(
    X: np.ndarray, centers: np.ndarray, max_iter: int, tol: float
) -> tuple[np.ndarray, np.ndarray, float]:
    k = centers.shape[0]
    labels = np.zeros(len(X), dtype=int)
    for _ in range(max_iter):
        labels, _ = _assign(X, centers)
        labels = _repair_empty(X, labels, centers, k)
        new_centers = _class_means(X, labels, k)
        movement = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        if movement < tol:
            break
    final_labels, d2 = _assign(X, centers)
    if np.bincount(final_labels, minlength=k).min() > 0:
        labels = final_labels
    inertia = float(d2[np.arange(len(X)), labels].sum())
    return labels, centers, inertia


def kmeans(
    X,
    k: int,
    seed: Seed = 0,
    n_init: int = DEFAULT_N_INIT,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
) -> ClusterModel:
    """Best-of-``n_init`` Lloyd runs by inertia.

    Each restart i draws its k distinct initial points from the child
    stream ``subseed(seed, i)``, so restarts may run in any order (or in
    parallel) with identical results.  Empty clusters are repaired by
    reassigning the point farthest from its current center.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InputError(f"expected a 2-D point matrix, got shape {X.shape}")
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ConfigError(f"k must be in [1, {n}], got {k}")
    if n_init < 1:
        raise ConfigError(f"n_init must be positive, got {n_init}")
    if max_iter < 1:
        raise ConfigError(f"max_iter must be positive, got {max_iter}")
    root = seed_sequence(seed)
    best: tuple[np.ndarray, np.ndarray, float] | None = None
    for i in range(n_init):
        rng = substream(root, i)
        init = rng.choice(n, size=k, replace=False)
        result = _lloyd(X, X[init].copy(), max_iter, tol)
        if best is None or result[2] < best[2]:
            best = result
    labels, centers, inertia = best
    return ClusterModel(k=k, centers=centers, labels=labels, inertia=inertia, method="KMC")


def knn_affinity(X, k_nn: int) -> np.ndarray:
    """Binary k-nearest-neighbour affinity with union symmetrization, zero diagonal.

    Distance ties are broken toward the lower point index.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if not 1 <= k_nn < n:
        raise ConfigError(f"k_nn must be in [1, {n - 1}], got {k_nn}")
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(d2, np.inf)
    order = np.argsort(d2, axis=1, kind="stable")
    A = np.zeros((n, n))
    rows = np.repeat(np.arange(n), k_nn)
    A[rows, order[:, :k_nn].ravel()] = 1.0
    return np.maximum(A, A.T)


def _graph_components(A: np.ndarray) -> int:
    n = A.shape[0]
    seen = np.zeros(n, dtype=bool)
    components = 0
    for start in range(n):
        if seen[start]:
            continue
        components += 1
        stack = [start]
        seen[start] = True
        while stack:
            node = stack.pop()
            for nb in np.flatnonzero(A[node] > 0):
                if not seen[nb]:
                    seen[nb] = True
                    stack.append(int(nb))
    return components


#: Memo of Laplacian eigensystems keyed by (matrix bytes, k_nn); the gap
#: statistic re-clusters the same points at every candidate k, and the
#: decomposition is the expensive part.
_EMBEDDING_CACHE: dict[tuple[bytes, tuple[int, ...], int], tuple[int, np.ndarray]] = {}
_EMBEDDING_CACHE_MAX = 128


def _laplacian_embedding(X: np.ndarray, k_nn: int) -> tuple[int, np.ndarray]:
    """(graph component count, eigenvectors of L by ascending eigenvalue)."""
    key = (X.tobytes(), X.shape, k_nn)
    hit = _EMBEDDING_CACHE.get(key)
    if hit is not None:
        return hit
    A = knn_affinity(X, k_nn)
    components = _graph_components(A)
    L = np.diag(A.sum(axis=1)) - A
    eig = sym_eigen(L)
    result = (components, eig.eigenvectors[:, ::-1].copy())
    if len(_EMBEDDING_CACHE) >= _EMBEDDING_CACHE_MAX:
        _EMBEDDING_CACHE.pop(next(iter(_EMBEDDING_CACHE)))
    _EMBEDDING_CACHE[key] = result
    return result


def spectral(X, k: int, k_nn: int | None = None, seed: Seed = 0) -> ClusterModel:
    """Spectral clustering with the unnormalized Laplacian of a kNN graph.

    Labels come from k-means on the n x k eigenvector embedding; centers are
    recomputed as per-cluster means of the original reduced points.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InputError(f"expected a 2-D point matrix, got shape {X.shape}")
    n = X.shape[0]
    if not 2 <= k <= n:
        raise ConfigError(f"k must be in [2, {n}], got {k}")
    if k_nn is None:
        k_nn = min(10, n - 1)
    components, vectors = _laplacian_embedding(X, k_nn)
    if components > k:
        raise NumericalError(
            f"affinity graph has {components} components for k={k}; increase k_nn ({k_nn})"
        )
    if components > 1:
        warnings.warn(
            f"affinity graph is disconnected ({components} components); "
            "spectral embedding may be unstable",
            stacklevel=2,
        )
    # columns for the k smallest eigenvalues, in ascending eigenvalue order
    embedding = vectors[:, :k]
    km = kmeans(embedding, k, seed=seed)
    labels = km.labels
    centers = _class_means(X, labels, k)
    return ClusterModel(
        k=k,
        centers=centers,
        labels=labels,
        inertia=within_dispersion(X, labels),
        method="SC",
    )


def within_dispersion(X, labels) -> float:
    """Within-cluster sum of squared distances to cluster means."""
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    if labels.shape[0] != X.shape[0]:
        raise InputError(f"{labels.shape[0]} labels for {X.shape[0]} points")
    total = 0.0
    for c in np.unique(labels):
        members = X[labels == c]
        total += float(((members - members.mean(axis=0)) ** 2).sum())
    return total


def gap_statistic(
    X,
    k_range: Sequence[int],
    B: int = DEFAULT_GAP_B,
    clusterer: Clusterer = kmeans,
    seed: Seed = 0,
) -> GapResult:
    """Gap statistic over candidate cluster counts.

    Gap(k) = mean_b log W_b(k) - log W(k) with B reference datasets drawn
    uniformly over the axis-aligned bounding box of X (degenerate axes stay
    at their constant value); sk is the reference-dispersion standard
    deviation scaled by sqrt(1 + 1/B).  The chosen k is the argmax of the
    gap, ties toward the smaller k.

    Substreams: reference draw b uses key (2, b); data clustering for the
    i-th k uses (1, i); reference clustering uses (3, i, b).
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    k_values = sorted(dict.fromkeys(int(k) for k in k_range))
    if not k_values:
        raise ConfigError("k_range is empty")
    if k_values[0] < 1 or k_values[-1] >= n:
        raise ConfigError(f"k_range must lie within [1, {n - 1}], got {k_values}")
    if B < 10:
        raise ConfigError(f"B must be at least 10, got {B}")
    root = seed_sequence(seed)
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    references = [substream(root, 2, b).uniform(lo, hi, size=X.shape) for b in range(B)]

    gap = np.empty(len(k_values))
    sk = np.empty(len(k_values))
    for i, k in enumerate(k_values):
        model = clusterer(X, k, subseed(root, 1, i))
        log_w = np.log(max(within_dispersion(X, model.labels), _LOG_FLOOR))
        log_w_ref = np.empty(B)
        for b, ref in enumerate(references):
            ref_model = clusterer(ref, k, subseed(root, 3, i, b))
            log_w_ref[b] = np.log(max(within_dispersion(ref, ref_model.labels), _LOG_FLOOR))
        gap[i] = log_w_ref.mean() - log_w
        sk[i] = log_w_ref.std() * np.sqrt(1.0 + 1.0 / B)
    chosen = k_values[int(np.argmax(gap))]
    return GapResult(k_values=tuple(k_values), gap=gap, sk=sk, chosen_k=chosen)


def first_crossing_k(result: GapResult) -> int:
    """Smallest k whose gap is within one reference standard error of the next gap.

    This is the conservative reading of the gap curve: stop at the first k
    with Gap(k) >= Gap(k+1) - sk(k+1).  On curves that rise sharply to the
    true cluster count and then plateau with sampling wiggle, the global
    argmax drifts into the plateau while this rule stops at the shoulder;
    batch pipelines use it for automatic selection.  Falls back to the
    argmax when the curve rises through the whole range.
    """
    for i in range(len(result.k_values) - 1):
        if result.gap[i] >= result.gap[i + 1] - result.sk[i + 1]:
            return result.k_values[i]
    return result.chosen_k


def model_to_dict(model: ClusterModel) -> dict:
    return {
        "k": model.k,
        "centers": model.centers.tolist(),
        "labels": [int(c) for c in model.labels],
        "inertia": model.inertia,
        "method": model.method,
    }


def model_from_dict(doc: dict) -> ClusterModel:
    return ClusterModel(
        k=int(doc["k"]),
        centers=np.array(doc["centers"], dtype=float),
        labels=np.array(doc["labels"], dtype=int),
        inertia=float(doc["inertia"]),
        method=str(doc["method"]),
    )


def save_model(path, model: ClusterModel) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2, sort_keys=True) + "\n")


def load_model(path) -> ClusterModel:
    return model_from_dict(json.loads(Path(path).read_text()))


def write_gap_csv(path_or_file, result: GapResult) -> None:
    """Dump the gap curve as ``k,gap,sk``."""

    def _write(stream) -> None:
        stream.write("k,gap,sk\n")
        for k, g, s in zip(result.k_values, result.gap, result.sk):
            stream.write(f"{k},{float(g)!r},{float(s)!r}\n")

    if isinstance(path_or_file, (str, Path)):
        with open(path_or_file, "w", encoding="utf-8", newline="") as stream:
            _write(stream)
    else:
        _write(path_or_file)
