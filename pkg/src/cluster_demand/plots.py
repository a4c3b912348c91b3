"""Static SVG figures for subjective inspection of clustering results.

Every figure's numeric data is also written as a CSV next to the SVG, so
results can be inspected without re-running the pipeline.  SVG output is
byte-deterministic: the matplotlib hash salt is pinned and the creation
date is stripped.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

import numpy as np  # noqa: E402

from .cluster import ClusterModel, GapResult  # noqa: E402
from .ingest import HouseholdSeries  # noqa: E402
from .preprocess import ProfileMatrix  # noqa: E402

_SVG_SALT = "cluster-demand"


def _save(fig, path) -> None:
    plt.rcParams["svg.hashsalt"] = _SVG_SALT
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_cluster_profiles(profiles: ProfileMatrix, model: ClusterModel, out_dir) -> list[Path]:
    """One SVG per cluster: each member household's normalized profile as a line."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    xs = np.arange(profiles.d)
    written = []
    for c in range(model.k):
        members = [i for i, label in enumerate(model.labels) if label == c]
        fig, ax = plt.subplots(figsize=(6, 4))
        for i in members:
            ax.plot(xs, profiles.matrix[i], label=profiles.household_ids[i])
        ax.set_xlabel("slot of day")
        ax.set_ylabel("normalized median demand")
        ax.set_title(f"cluster {c + 1} ({len(members)} households)")
        ax.legend(fontsize=7, ncol=2)
        svg = out / f"cluster_{c + 1}.svg"
        _save(fig, svg)
        with open(out / f"cluster_{c + 1}.csv", "w", encoding="utf-8", newline="") as stream:
            stream.write("household_id," + ",".join(f"s{j:02d}" for j in range(profiles.d)) + "\n")
            for i in members:
                stream.write(
                    profiles.household_ids[i]
                    + ","
                    + ",".join(repr(float(v)) for v in profiles.matrix[i])
                    + "\n"
                )
        written.append(svg)
    return written


def plot_household_boxplot(series: HouseholdSeries, out_path) -> Path:
    """Per-slot box plot of a household's daily consumption, with its median profile."""
    out_path = Path(out_path)
    matrix = series.day_matrix
    d = matrix.shape[1]
    median = np.median(matrix, axis=0)
    norm = float(np.sqrt((median * median).sum()))
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.boxplot(matrix, positions=np.arange(d), widths=0.6, flierprops={"markersize": 2})
    ax.plot(np.arange(d), median, color="tab:red", linewidth=2, label="median")
    if norm > 0:
        normalized = median / norm
        scaled = normalized * (0.95 * float(matrix.max()) / float(normalized.max()))
        ax.plot(np.arange(d), scaled, color="tab:blue", linewidth=1, linestyle="--",
                label="scaled normalized median")
    ax.set_xlabel("slot of day")
    ax.set_ylabel("kWh")
    ax.set_title(f"household {series.household_id} daily consumption")
    ax.legend(fontsize=8)
    _save(fig, out_path)
    with open(out_path.with_suffix(".csv"), "w", encoding="utf-8", newline="") as stream:
        stream.write(",".join(f"s{j:02d}" for j in range(d)) + "\n")
        for row in matrix:
            stream.write(",".join(repr(float(v)) for v in row) + "\n")
    return out_path


def plot_elbow_curve(
    xs: Sequence[float],
    ys: Sequence[float],
    xlabel: str,
    ylabel: str,
    out_path,
    chosen_index: int | None = None,
) -> Path:
    out_path = Path(out_path)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(list(xs), list(ys), marker="o", markersize=3)
    if chosen_index is not None:
        ax.axvline(list(xs)[chosen_index], color="tab:red", linestyle="--", linewidth=1)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(f"{ylabel} vs {xlabel}")
    _save(fig, out_path)
    return out_path


def plot_gap_curve(result: GapResult, out_path) -> Path:
    out_path = Path(out_path)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(result.k_values, result.gap, yerr=result.sk, capsize=3)
    ax.axvline(result.chosen_k, color="tab:red", linestyle="--", linewidth=1)
    ax.set_xlabel("number of clusters k")
    ax.set_ylabel("gap")
    ax.set_title(f"gap statistic (chosen k = {result.chosen_k})")
    _save(fig, out_path)
    return out_path
