"""Batch CLI: synthesize, ingest, preprocess, reduce, cluster, validate, plot.

Configuration comes from an optional TOML file; every field can be
overridden by a command-line flag, and flags win.  All artifacts are plain
CSV/JSON/SVG files in the output directory, written deterministically so
two runs with the same config and seed are byte-identical.

Exit codes: 0 success, 1 input error, 2 numerical failure, 3 configuration
error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import cluster, dimred, ingest, plots, preprocess, synth, validate
from .errors import ClusterDemandError, ConfigError, InputError, NumericalError
from .rng import subseed

log = logging.getLogger("cluster_demand")

FRAMEWORKS = ("FA+SC", "FA+KMC", "PCA+SC", "PCA+KMC")
EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2
EXIT_CONFIG = 3

# Stage seed namespaces (children of the config seed), so no two stages
# share a PRNG substream.
_SEED_CLUSTER_FIT = 1
_SEED_GAP = 2
_SEED_VALIDATE = 3


@dataclass
class PipelineConfig:
    """Everything a pipeline run needs; mirrors the TOML schema and flags."""

    input: str | None = None
    out: str = "out"
    seed: int = 0
    resolution: int = 1
    reducer: str = "pca"  # pca | fa
    dim: str = "auto"  # "auto" or positive integer
    clusterer: str = "kmc"  # kmc | sc
    k: str = "auto"  # "auto" or positive integer
    knn: int | None = None
    gap_b: int = cluster.DEFAULT_GAP_B
    p: list[int] = field(default_factory=lambda: [2, 3])
    reps: int = validate.DEFAULT_REPETITIONS
    framework: str = "one"  # one | all
    min_days: int = ingest.DEFAULT_MIN_COMPLETE_DAYS
    workers: int = 1


def load_config(path) -> PipelineConfig:
    try:
        with open(path, "rb") as stream:
            doc = tomllib.load(stream)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    config = PipelineConfig(**doc)
    config.dim = str(config.dim)
    config.k = str(config.k)
    config.p = [int(v) for v in config.p]
    return config


def _validate_config(config: PipelineConfig, need_input: bool = True) -> None:
    if need_input and not config.input:
        raise ConfigError("no input CSV given (set --input or the config 'input' field)")
    if config.reducer not in ("pca", "fa"):
        raise ConfigError(f"reducer must be 'pca' or 'fa', got {config.reducer!r}")
    if config.clusterer not in ("kmc", "sc"):
        raise ConfigError(f"clusterer must be 'kmc' or 'sc', got {config.clusterer!r}")
    if config.framework not in ("one", "all"):
        raise ConfigError(f"framework must be 'one' or 'all', got {config.framework!r}")
    for name in ("dim", "k"):
        value = getattr(config, name)
        if value != "auto":
            try:
                if int(value) < 1:
                    raise ValueError
            except ValueError:
                raise ConfigError(f"{name} must be 'auto' or a positive integer, got {value!r}") from None
    if any(p < 1 for p in config.p):
        raise ConfigError(f"every p must be positive, got {config.p}")
    if config.seed < 0:
        raise ConfigError(f"seed must be non-negative, got {config.seed}")


def _call(module_op: str, fn, *args, **kwargs):
    """Run one spec operation, prefixing errors with module.operation context."""
    try:
        return fn(*args, **kwargs)
    except ClusterDemandError as exc:
        raise type(exc)(f"{module_op}: {exc}") from exc


# ----------------------------------------------------------------------------
# pipeline stages
# ----------------------------------------------------------------------------


def _load_households(config: PipelineConfig):
    readings = _call("ingest.parse_readings", ingest.parse_readings, config.input, config.resolution)
    households, exclusions = _call(
        "ingest.build_day_matrices",
        ingest.build_day_matrices,
        readings,
        config.resolution,
        config.min_days,
    )
    return households, exclusions


def _fit_reducer(config: PipelineConfig, profiles: preprocess.ProfileMatrix, kind: str):
    """Fit PCA or FA with elbow-selected dimension unless overridden.

    Returns (reducer, curve_xs, curve_ys, curve_header, chosen_index).
    """
    if kind == "pca":
        curve = _call("dimred.cevr_curve", dimred.cevr_curve, profiles)
        xs = [float(c[0]) for c in curve]
        ys = [c[1] for c in curve]
        header = "d_prime,cevr"
        if config.dim == "auto":
            idx = _call("dimred.elbow_point", dimred.elbow_point, xs, ys)
            d_prime = int(xs[idx])
        else:
            d_prime = int(config.dim)
            idx = d_prime - 1 if d_prime - 1 < len(xs) else None
        reducer = _call("dimred.pca_fit", dimred.pca_fit, profiles, d_prime)
        return reducer, xs, ys, header, idx
    thresholds = _call("dimred.fa_merge_thresholds", dimred.fa_merge_thresholds, profiles)
    curve = _call("dimred.fa_threshold_curve", dimred.fa_threshold_curve, profiles, thresholds)
    xs = [c[0] for c in curve]
    ys = [float(c[1]) for c in curve]
    header = "threshold,d_prime"
    if config.dim == "auto":
        idx = _call("dimred.elbow_point", dimred.elbow_point, xs, ys)
        threshold = xs[idx]
    else:
        wanted = int(config.dim)
        matching = [i for i, (_, dp) in enumerate(curve) if dp == wanted]
        if not matching:
            raise ConfigError(
                f"dimred.fa_fit: no merge threshold yields d'={wanted}; "
                f"reachable values are {sorted({dp for _, dp in curve}, reverse=True)}"
            )
        idx = matching[0]
        threshold = xs[idx]
    reducer = _call("dimred.fa_fit", dimred.fa_fit, profiles, threshold)
    return reducer, xs, ys, header, idx


def _default_k_range(n: int, clusterer_kind: str) -> list[int]:
    low = 1 if clusterer_kind == "kmc" else 2
    return list(range(low, min(10, n - 1) + 1))


def _fit_model(config: PipelineConfig, reduced: dimred.ReducedMatrix, clusterer_kind: str):
    """Cluster the reduced matrix, choosing k by gap statistic unless overridden.

    Returns (model, gap_result_or_None).
    """
    X = reduced.matrix
    n = X.shape[0]
    seed_fit = subseed(config.seed, _SEED_CLUSTER_FIT)
    seed_gap = subseed(config.seed, _SEED_GAP)
    if clusterer_kind == "kmc":
        def clusterer(points, k, seed):
            return cluster.kmeans(points, k, seed=seed)
    else:
        k_nn = config.knn if config.knn is not None else min(10, n - 1)

        def clusterer(points, k, seed):
            return cluster.spectral(points, k, k_nn=k_nn, seed=seed)

    gap_result = None
    if config.k == "auto":
        k_range = _default_k_range(n, clusterer_kind)
        gap_result = _call(
            "cluster.gap_statistic",
            cluster.gap_statistic,
            X,
            k_range,
            B=config.gap_b,
            clusterer=clusterer,
            seed=seed_gap,
        )
        k = cluster.first_crossing_k(gap_result)
    else:
        k = int(config.k)
    op = "cluster.kmeans" if clusterer_kind == "kmc" else "cluster.spectral"
    model = _call(op, clusterer, X, k, seed_fit)
    return model, gap_result


def _framework_pair(label: str) -> tuple[str, str]:
    reducer_kind, clusterer_kind = label.split("+")
    return reducer_kind.lower(), clusterer_kind.lower()


def _run_framework(config: PipelineConfig, households, profiles, label: str, out_dir: Path):
    """Fit + cluster + validate one framework; returns its comparison rows."""
    reducer_kind, clusterer_kind = _framework_pair(label)
    fw_dir = out_dir / label.replace("+", "-").lower()
    fw_dir.mkdir(parents=True, exist_ok=True)

    reducer, xs, ys, curve_header, chosen_idx = _fit_reducer(
        replace(config, reducer=reducer_kind), profiles, reducer_kind
    )
    dimred.save_reducer(fw_dir / "reducer.json", reducer)
    with open(fw_dir / "elbow_curve.csv", "w", encoding="utf-8", newline="") as stream:
        stream.write(curve_header + "\n")
        for x, y in zip(xs, ys):
            stream.write(f"{float(x)!r},{float(y)!r}\n")
    log.info("%s: reducer %s with d'=%d", label, reducer.kind, reducer.n_components)

    reduced = dimred.reduce_profiles(reducer, profiles)
    model, gap_result = _fit_model(replace(config, clusterer=clusterer_kind), reduced, clusterer_kind)
    cluster.save_model(fw_dir / "model.json", model)
    if gap_result is not None:
        cluster.write_gap_csv(fw_dir / "gap_curve.csv", gap_result)
    log.info("%s: %s with k=%d (inertia %.6g)", label, model.method, model.k, model.inertia)

    scores = _call("validate.cvi_scores", validate.cvi_scores, reduced.matrix, model.labels)
    rows = []
    for p in config.p:
        report = _call(
            "validate.objective_validate",
            validate.objective_validate,
            households,
            reducer,
            model,
            p,
            repetitions=config.reps,
            seed=subseed(config.seed, _SEED_VALIDATE, p),
            workers=config.workers,
        )
        validate.save_report(fw_dir / f"validation_p{p}.json", report)
        log.info("%s: p=%d pct_matches=%.2f", label, p, report.pct_matches)
        rows.append((report, scores))

    plot_dir = fw_dir / "plots"
    plots.plot_cluster_profiles(profiles, model, plot_dir)
    if reducer.kind == "PCA":
        plots.plot_elbow_curve(xs, ys, "d'", "CEVR", plot_dir / "elbow.svg", chosen_idx)
    else:
        plots.plot_elbow_curve(xs, ys, "distance threshold", "d'", plot_dir / "elbow.svg", chosen_idx)
    if gap_result is not None:
        plots.plot_gap_curve(gap_result, plot_dir / "gap.svg")
    return rows


def run_pipeline(config: PipelineConfig) -> Path:
    """Run the full two-step framework (or all four) and write artifacts.

    Artifact order: profile matrix CSV, then per framework the reducer JSON
    and elbow curve CSV, cluster model JSON and gap curve CSV, validation
    report JSON, plots; finally the cross-framework comparison CSV.
    """
    _validate_config(config)
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    households, exclusions = _load_households(config)
    ingest.write_exclusions_csv(out_dir / "exclusions.csv", exclusions)
    profiles = _call("preprocess.preprocess", preprocess.preprocess, households, config.resolution)
    preprocess.write_profiles_csv(out_dir / "profiles.csv", profiles)
    log.info("preprocessed %d households x %d slots", profiles.n, profiles.d)

    if config.framework == "all":
        labels = FRAMEWORKS
    else:
        labels = (f"{config.reducer.upper()}+{config.clusterer.upper()}",)

    comparison = []
    for label in labels:
        comparison.extend(_run_framework(config, households, profiles, label, out_dir))
    validate.write_comparison_csv(out_dir / "comparison.csv", comparison)
    return out_dir


def emit_plots(artifacts_dir, input_path=None, resolution: int = 1,
               households: tuple[str, ...] = (), min_days: int = ingest.DEFAULT_MIN_COMPLETE_DAYS) -> list[Path]:
    """Regenerate figures from an artifact directory.

    Box plots need the raw readings, so ``input_path`` is required when
    ``households`` is non-empty.  Missing artifacts raise InputError naming
    the file.
    """
    art = Path(artifacts_dir)
    profiles_csv = art / "profiles.csv"
    if not profiles_csv.exists():
        raise InputError(f"missing artifact: {profiles_csv}")
    profiles = preprocess.read_profiles_csv(profiles_csv)
    written = []
    for fw_dir in sorted(p for p in art.iterdir() if p.is_dir() and (p / "model.json").exists()):
        reducer_json = fw_dir / "reducer.json"
        if not reducer_json.exists():
            raise InputError(f"missing artifact: {reducer_json}")
        model = cluster.load_model(fw_dir / "model.json")
        plot_dir = fw_dir / "plots"
        written.extend(plots.plot_cluster_profiles(profiles, model, plot_dir))
        gap_csv = fw_dir / "gap_curve.csv"
        if gap_csv.exists():
            rows = [line.split(",") for line in gap_csv.read_text().splitlines()[1:] if line]
            result = cluster.GapResult(
                k_values=tuple(int(r[0]) for r in rows),
                gap=np.array([float(r[1]) for r in rows]),
                sk=np.array([float(r[2]) for r in rows]),
                chosen_k=model.k,
            )
            written.append(plots.plot_gap_curve(result, plot_dir / "gap.svg"))
    if households:
        if input_path is None:
            raise InputError("box plots need --input pointing at the readings CSV")
        readings = ingest.parse_readings(input_path, resolution)
        series_map, _ = ingest.build_day_matrices(readings, resolution, min_days)
        box_dir = art / "boxplots"
        box_dir.mkdir(parents=True, exist_ok=True)
        for hid in households:
            if hid not in series_map:
                raise InputError(f"household {hid} not found in {input_path}")
            written.append(
                plots.plot_household_boxplot(series_map[hid], box_dir / f"{hid}.svg")
            )
    return written


# ----------------------------------------------------------------------------
# argument parsing
# ----------------------------------------------------------------------------


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="TOML config file")
    parser.add_argument("--input", help="readings CSV path")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="root PRNG seed")
    parser.add_argument("--resolution", type=int, help="meter resolution in hours (divides 24)")
    parser.add_argument("--reducer", choices=["pca", "fa"], help="dimensionality reduction step")
    parser.add_argument("--dim", help="reduced dimension d' or 'auto' (elbow)")
    parser.add_argument("--clusterer", choices=["kmc", "sc"], help="clustering step")
    parser.add_argument("--k", help="cluster count or 'auto' (gap statistic)")
    parser.add_argument("--knn", type=int, help="neighbours for the spectral affinity graph")
    parser.add_argument("--gap-b", type=int, dest="gap_b", help="gap statistic reference draws")
    parser.add_argument("--p", help="comma-separated partition counts, e.g. 2,3")
    parser.add_argument("--reps", type=int, help="validation repetitions")
    parser.add_argument("--framework", choices=["one", "all"], help="run one framework or all four")
    parser.add_argument("--min-days", type=int, dest="min_days", help="minimum complete days per household")
    parser.add_argument("--workers", type=int, help="threads for validation repetitions")


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    config = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    for name in ("input", "out", "seed", "resolution", "reducer", "dim", "clusterer",
                 "k", "knn", "gap_b", "reps", "framework", "min_days", "workers"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(config, name, value)
    if getattr(args, "p", None) is not None:
        try:
            config.p = [int(v) for v in str(args.p).split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"--p must be a comma-separated integer list, got {args.p!r}") from None
        if not config.p:
            raise ConfigError("--p must name at least one partition count")
    return config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cluster-demand",
        description="Cluster residential electric demand profiles and validate the framework.",
    )
    verbose = argparse.ArgumentParser(add_help=False)
    verbose.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    synth_p = sub.add_parser("synth", help="generate a synthetic dataset with known clusters",
                             parents=[verbose])
    synth_p.add_argument("--out", default="synth_out")
    synth_p.add_argument("--seed", type=int, default=0)
    synth_p.add_argument("--resolution", type=int, default=1)
    synth_p.add_argument("--households-per-archetype", type=int, default=7, dest="per_archetype")
    synth_p.add_argument("--days", type=int, default=400)
    synth_p.add_argument("--noise", type=float, default=0.05)
    synth_p.add_argument("--missing-rate", type=float, default=0.1, dest="missing_rate")

    for name, help_text in [
        ("ingest", "parse readings and report exclusions"),
        ("preprocess", "write the normalized median profile matrix"),
        ("reduce", "fit the dimensionality reduction step"),
        ("cluster", "fit the clustering step on the reduced matrix"),
        ("validate", "run the objective validation strategy"),
        ("pipeline", "run the whole framework end to end"),
    ]:
        p = sub.add_parser(name, help=help_text, parents=[verbose])
        _add_common_flags(p)

    plot_p = sub.add_parser("plot", help="regenerate figures from artifacts", parents=[verbose])
    _add_common_flags(plot_p)
    plot_p.add_argument("--households", default="", help="comma-separated household ids for box plots")

    return parser


# ----------------------------------------------------------------------------
# subcommand implementations
# ----------------------------------------------------------------------------


def _cmd_synth(args) -> None:
    archetypes = synth.default_archetypes(args.resolution, noise_sigma=args.noise)
    dataset = _call(
        "synth.generate",
        synth.generate,
        archetypes,
        args.per_archetype,
        args.days,
        missing_day_rate=args.missing_rate,
        seed=args.seed,
        resolution_hours=args.resolution,
    )
    readings_path, labels_path = dataset.write(args.out)
    print(f"wrote {readings_path} and {labels_path}")


def _cmd_ingest(config: PipelineConfig) -> None:
    _validate_config(config)
    households, exclusions = _load_households(config)
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    ingest.write_exclusions_csv(out_dir / "exclusions.csv", exclusions)
    summary = {
        "n_households": len(households),
        "n_excluded": len(exclusions),
        "complete_days": {hid: int(s.day_matrix.shape[0]) for hid, s in sorted(households.items())},
        "days_dropped": {hid: s.n_days_dropped for hid, s in sorted(households.items())},
    }
    (out_dir / "ingest_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"retained {len(households)} households, excluded {len(exclusions)}")


def _cmd_preprocess(config: PipelineConfig) -> None:
    _validate_config(config)
    households, _ = _load_households(config)
    profiles = _call("preprocess.preprocess", preprocess.preprocess, households, config.resolution)
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    preprocess.write_profiles_csv(out_dir / "profiles.csv", profiles)
    print(f"wrote {out_dir / 'profiles.csv'} ({profiles.n}x{profiles.d})")


def _cmd_reduce(config: PipelineConfig) -> None:
    _validate_config(config)
    households, _ = _load_households(config)
    profiles = _call("preprocess.preprocess", preprocess.preprocess, households, config.resolution)
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    reducer, xs, ys, header, _ = _fit_reducer(config, profiles, config.reducer)
    dimred.save_reducer(out_dir / "reducer.json", reducer)
    with open(out_dir / "elbow_curve.csv", "w", encoding="utf-8", newline="") as stream:
        stream.write(header + "\n")
        for x, y in zip(xs, ys):
            stream.write(f"{float(x)!r},{float(y)!r}\n")
    print(f"fitted {reducer.kind} reducer with d'={reducer.n_components}")


def _cmd_cluster(config: PipelineConfig) -> None:
    _validate_config(config)
    out_dir = Path(config.out)
    reducer_json = out_dir / "reducer.json"
    if not reducer_json.exists():
        raise InputError(f"missing artifact: {reducer_json} (run the reduce step first)")
    reducer = dimred.load_reducer(reducer_json)
    households, _ = _load_households(config)
    profiles = _call("preprocess.preprocess", preprocess.preprocess, households, config.resolution)
    reduced = dimred.reduce_profiles(reducer, profiles)
    clusterer_kind = config.clusterer
    model, gap_result = _fit_model(config, reduced, clusterer_kind)
    cluster.save_model(out_dir / "model.json", model)
    if gap_result is not None:
        cluster.write_gap_csv(out_dir / "gap_curve.csv", gap_result)
    print(f"fitted {model.method} model with k={model.k}")


def _cmd_validate(config: PipelineConfig) -> None:
    _validate_config(config)
    out_dir = Path(config.out)
    for name in ("reducer.json", "model.json"):
        if not (out_dir / name).exists():
            raise InputError(f"missing artifact: {out_dir / name}")
    reducer = dimred.load_reducer(out_dir / "reducer.json")
    model = cluster.load_model(out_dir / "model.json")
    households, _ = _load_households(config)
    profiles = _call("preprocess.preprocess", preprocess.preprocess, households, config.resolution)
    reduced = dimred.reduce_profiles(reducer, profiles)
    scores = _call("validate.cvi_scores", validate.cvi_scores, reduced.matrix, model.labels)
    rows = []
    for p in config.p:
        report = _call(
            "validate.objective_validate",
            validate.objective_validate,
            households,
            reducer,
            model,
            p,
            repetitions=config.reps,
            seed=subseed(config.seed, _SEED_VALIDATE, p),
            workers=config.workers,
        )
        validate.save_report(out_dir / f"validation_p{p}.json", report)
        rows.append((report, scores))
        print(f"{report.framework_label} p={p}: pct_matches={report.pct_matches:.2f}")
    validate.write_comparison_csv(out_dir / "comparison.csv", rows)


def _cmd_pipeline(config: PipelineConfig) -> None:
    out = run_pipeline(config)
    print(f"pipeline artifacts in {out}")


def _cmd_plot(config: PipelineConfig, households: tuple[str, ...]) -> None:
    written = emit_plots(
        config.out,
        input_path=config.input,
        resolution=config.resolution,
        households=households,
        min_days=config.min_days,
    )
    print(f"wrote {len(written)} figures under {config.out}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.command == "synth":
            _cmd_synth(args)
            return EXIT_OK
        config = _config_from_args(args)
        if args.command == "ingest":
            _cmd_ingest(config)
        elif args.command == "preprocess":
            _cmd_preprocess(config)
        elif args.command == "reduce":
            _cmd_reduce(config)
        elif args.command == "cluster":
            _cmd_cluster(config)
        elif args.command == "validate":
            _cmd_validate(config)
        elif args.command == "pipeline":
            _cmd_pipeline(config)
        elif args.command == "plot":
            households = tuple(h for h in args.households.split(",") if h)
            _cmd_plot(config, households)
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
