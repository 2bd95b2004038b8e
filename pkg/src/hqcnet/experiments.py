"""Reproducible experiment driver.

A run takes one ExperimentConfig, trains one hybrid model, and leaves
exactly six artifacts in its output directory:

    config.json       resolved configuration
    epochs.csv        per-epoch train/val accuracy and mean loss
    metrics.json      the MetricReport computed from the series
    captures.csv      per-stage embeddings of the training split
    separability.csv  PCA ratios + silhouette per stage and label source
    checkpoint.json   best-validation parameter snapshot

Everything is seeded, floats are written with round-trip repr, and
dictionaries are ordered, so a repeated run is byte-identical.  Depth
and feature-map studies fan out over single runs (optionally in a
process pool) and join the per-run artifacts into summary tables
without recomputing anything.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .circuits import FEATURE_MAP_NAMES
from .data import build_heatmap, load_pairs, split, synth_dataset
from .diagnostics import METRIC_FIELDS, compute_metrics
from .layers import load_checkpoint, save_checkpoint
from .separability import pca_fit, silhouette_scores
from .training import (
    CAPTURE_STAGES,
    DivergenceError,
    TrainConfig,
    build_hybrid_model,
    capture_stage,
    images_and_labels,
    train,
)

ARTIFACT_NAMES = (
    "config.json",
    "epochs.csv",
    "metrics.json",
    "captures.csv",
    "separability.csv",
    "checkpoint.json",
)

# How many leading variance ratios each stage reports, following the
# stage dimensionalities at the default three-qubit width.
STAGE_RATIO_COUNTS = {"post_classical": 3, "post_feature_map": 2, "post_qnn": 1}

LABEL_SOURCES = ("fitted", "train")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_path: str | None = None
    n_samples: int = 600
    n_points: int = 128
    data_seed: int = 7
    split_ratio: float = 0.8
    n_qubits: int = 3
    feature_map: str = "pauli_xyz_1_rep"
    ansatz_depth: int = 2
    dropout_p: float = 0.5
    learning_rate: float = 0.02
    momentum: float = 0.9
    weight_decay: float = 1e-6
    batch_size: int = 64
    max_epochs: int = 200
    patience: int = 100
    seed: int = 0
    out_dir: str = "runs/run"

    def __post_init__(self):
        if self.feature_map not in FEATURE_MAP_NAMES:
            raise ValueError(
                f"unknown feature map {self.feature_map!r}; "
                f"choose from {FEATURE_MAP_NAMES}"
            )
        if not 1 <= self.ansatz_depth <= 8:
            raise ValueError(f"ansatz_depth must be in [1, 8], got {self.ansatz_depth}")
        if self.n_qubits < 2:
            raise ValueError("n_qubits must be at least 2")
        if not 0.0 < self.split_ratio < 1.0:
            raise ValueError("split_ratio must be in (0, 1)")
        if self.dataset_path is None and self.n_samples < 6:
            raise ValueError("synthetic dataset needs at least 6 samples")
        if self.max_epochs < 5:
            raise ValueError("max_epochs must be at least 5")
        self.to_train_config()  # surface bad optimizer settings early

    def to_train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience=self.patience,
            seed=self.seed,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def config_from_mapping(mapping: dict) -> ExperimentConfig:
    """Build a config from string-keyed values, coercing numeric types."""
    unknown = set(mapping) - set(_FIELD_TYPES)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    coerced = {}
    for key, value in mapping.items():
        kind = _FIELD_TYPES[key]
        if value is None or value == "":
            coerced[key] = None
        elif kind == "int":
            coerced[key] = int(value)
        elif kind == "float":
            coerced[key] = float(value)
        else:
            coerced[key] = str(value)
    return ExperimentConfig(**coerced)


# ---------------------------------------------------------------------------
# Dataset assembly

def load_dataset(config: ExperimentConfig):
    """(train split, val split) of heatmap samples for this config."""
    if config.dataset_path is not None:
        pairs = load_pairs(config.dataset_path)
    else:
        pairs = synth_dataset(config.n_samples, config.n_points, config.data_seed)
    heatmaps = [build_heatmap(pair) for pair in pairs]
    return split(heatmaps, config.split_ratio, config.data_seed)


# ---------------------------------------------------------------------------
# Artifact writers

def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value: float) -> str:
    return repr(float(value))


def _write_epochs_csv(path: Path, series, losses) -> None:
    rows = [
        [str(int(e)), _fmt(t), _fmt(v), _fmt(l)]
        for e, t, v, l in zip(series.epochs, series.train, series.val, losses)
    ]
    _write_csv(path, ["epoch", "train_accuracy", "val_accuracy", "loss"], rows)


def _stage_tables(model, dataset):
    """Embeddings plus fitted/true labels for every capture stage."""
    images, true_labels = images_and_labels(dataset)
    fitted = model.predict(images)
    stages = {stage: capture_stage(model, dataset, stage) for stage in CAPTURE_STAGES}
    return stages, fitted, true_labels


def _write_captures_csv(path: Path, stages, fitted, true_labels) -> None:
    rows = []
    for stage in CAPTURE_STAGES:
        matrix = stages[stage]
        for sample, row in enumerate(matrix):
            for coordinate, value in enumerate(row):
                rows.append(
                    [
                        stage,
                        str(sample),
                        str(int(fitted[sample])),
                        str(int(true_labels[sample])),
                        str(coordinate),
                        _fmt(value),
                    ]
                )
    _write_csv(
        path, ["stage", "sample", "fitted", "true", "coordinate", "value"], rows
    )


def separability_rows(stages, fitted, true_labels):
    """(stage, label_source, ratio list, silhouette) for all six combos.

    Silhouettes are computed on the two-dimensional PCA projection of
    each stage (one-dimensional where the stage is scalar), matching
    the stage-by-stage scatter analysis the tables summarize.
    """
    rows = []
    for stage in CAPTURE_STAGES:
        matrix = stages[stage]
        d = matrix.shape[1]
        result = pca_fit(matrix, min(2, d))
        n_ratios = min(STAGE_RATIO_COUNTS[stage], d)
        ratios = " ".join(_fmt(r) for r in result.explained_variance_ratios[:n_ratios])
        for source, labels in (("fitted", fitted), ("train", true_labels)):
            if len(np.unique(labels)) < 2:
                score = ""  # collapsed labeling leaves the score undefined
            else:
                _, mean_score = silhouette_scores(result.projected, labels)
                score = _fmt(mean_score)
            rows.append([stage, source, ratios, score])
    return rows


def _write_separability_csv(path: Path, rows) -> None:
    _write_csv(path, ["stage", "label_source", "variance_ratios", "silhouette"], rows)


# ---------------------------------------------------------------------------
# Single run

def run_single(config: ExperimentConfig) -> Path:
    """Train one configuration and write the six run artifacts.

    On divergence the partial epoch log and a divergence.json record
    are written before the error is re-raised.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "config.json", config.to_dict())

    train_set, val_set = load_dataset(config)
    model = build_hybrid_model(
        config.n_qubits,
        config.feature_map,
        config.ansatz_depth,
        config.seed,
        dropout_p=config.dropout_p,
    )
    try:
        result = train(model, train_set, val_set, config.to_train_config())
    except DivergenceError as err:
        if err.series is not None:
            _write_epochs_csv(
                out / "epochs.csv", err.series, np.full(len(err.series), np.nan)
            )
        _write_json(
            out / "divergence.json", {"epoch": err.epoch, "message": str(err)}
        )
        raise

    _write_epochs_csv(out / "epochs.csv", result.series, result.losses)

    report = compute_metrics(
        result.series, slope_window=min(5, len(result.series))
    )
    _write_json(out / "metrics.json", report.to_dict())

    # Structure analysis is reported for the best-validation snapshot.
    model.load_state(result.best_state)
    stages, fitted, true_labels = _stage_tables(model, train_set)
    _write_captures_csv(out / "captures.csv", stages, fitted, true_labels)
    _write_separability_csv(
        out / "separability.csv", separability_rows(stages, fitted, true_labels)
    )
    save_checkpoint(out / "checkpoint.json", result.best_state)
    return out


# ---------------------------------------------------------------------------
# Studies

def _run_for_study(config: ExperimentConfig):
    """Worker-safe wrapper: never raises across a process boundary."""
    try:
        run_single(config)
        return config.out_dir, None
    except Exception as err:  # noqa: BLE001 - reported to the study caller
        return config.out_dir, f"{type(err).__name__}: {err}"


def _execute(configs, workers: int):
    if workers < 1:
        raise ValueError("workers must be at least 1")
    if workers == 1 or len(configs) == 1:
        return [_run_for_study(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_for_study, configs))


def _read_metrics(run_dir: Path) -> dict:
    return json.loads((run_dir / "metrics.json").read_text())


def _metric_cells(metrics: dict) -> list[str]:
    cells = []
    for name in METRIC_FIELDS:
        value = metrics[name]
        if value is None:
            cells.append("")
        elif name == "epoch_at_threshold":
            cells.append(str(int(value)))
        else:
            cells.append(_fmt(value))
    return cells


def run_depth_study(
    base: ExperimentConfig, depths: list[int], workers: int = 1
) -> tuple[list[dict], list[str]]:
    """One run per ansatz depth under a shared seed and dataset.

    Returns (summary rows, failure messages) and writes
    depth_summary.csv joining the per-run metric reports.
    """
    if len(depths) < 2:
        raise ValueError("depth study needs at least two depths")
    root = Path(base.out_dir)
    configs = [
        dataclasses.replace(
            base, ansatz_depth=d, out_dir=str(root / f"depth_{d}")
        )
        for d in depths
    ]
    outcomes = _execute(configs, workers)

    rows, failures = [], []
    for config, (run_dir, error) in zip(configs, outcomes):
        if error is not None:
            failures.append(f"depth {config.ansatz_depth}: {error}")
            continue
        metrics = _read_metrics(Path(run_dir))
        rows.append({"depth": config.ansatz_depth, **metrics})

    root.mkdir(parents=True, exist_ok=True)
    _write_csv(
        root / "depth_summary.csv",
        ["depth", *METRIC_FIELDS],
        [[str(r["depth"]), *_metric_cells(r)] for r in rows],
    )
    return rows, failures


def run_feature_map_study(
    base: ExperimentConfig, names: list[str], workers: int = 1
) -> tuple[list[dict], list[str]]:
    """One run per feature map; all names validated before any run starts.

    Writes fmap_accuracy.csv (map, final train/val accuracy) and
    fmap_separability.csv (the joined per-stage tables).
    """
    if not names:
        raise ValueError("feature-map study needs at least one name")
    bad = [n for n in names if n not in FEATURE_MAP_NAMES]
    if bad:
        raise ValueError(f"unknown feature maps: {bad}")

    root = Path(base.out_dir)
    configs = [
        dataclasses.replace(base, feature_map=n, out_dir=str(root / f"fmap_{n}"))
        for n in names
    ]
    outcomes = _execute(configs, workers)

    rows, failures = [], []
    sep_rows = []
    for config, (run_dir, error) in zip(configs, outcomes):
        if error is not None:
            failures.append(f"{config.feature_map}: {error}")
            continue
        metrics = _read_metrics(Path(run_dir))
        rows.append({"feature_map": config.feature_map, **metrics})
        with open(Path(run_dir) / "separability.csv", newline="") as handle:
            for record in list(csv.reader(handle))[1:]:
                sep_rows.append([config.feature_map, *record])

    root.mkdir(parents=True, exist_ok=True)
    _write_csv(
        root / "fmap_accuracy.csv",
        ["feature_map", "train_accuracy", "validation_accuracy"],
        [
            [r["feature_map"], _fmt(r["final_train"]), _fmt(r["final_val"])]
            for r in rows
        ],
    )
    _write_csv(
        root / "fmap_separability.csv",
        ["feature_map", "stage", "label_source", "variance_ratios", "silhouette"],
        sep_rows,
    )
    return rows, failures


# ---------------------------------------------------------------------------
# Plot data

def emit_plot_data(run_dir) -> list[Path]:
    """Plot-ready CSVs for a completed run, under <run_dir>/plots/.

    accuracy_curve.csv: epoch, train, val.  gap_curve.csv: epoch,
    |train-val|.  scatter_<stage>.csv: pc1, pc2, fitted, true (pc2 is
    zero where a stage is one-dimensional).
    """
    run_dir = Path(run_dir)
    epochs_file = run_dir / "epochs.csv"
    captures_file = run_dir / "captures.csv"
    if not epochs_file.exists() or not captures_file.exists():
        raise FileNotFoundError(f"{run_dir} is missing run artifacts")

    plots = run_dir / "plots"
    plots.mkdir(exist_ok=True)
    written = []

    with open(epochs_file, newline="") as handle:
        epoch_rows = list(csv.DictReader(handle))
    acc_rows = [
        [r["epoch"], r["train_accuracy"], r["val_accuracy"]] for r in epoch_rows
    ]
    _write_csv(plots / "accuracy_curve.csv", ["epoch", "train_accuracy", "val_accuracy"], acc_rows)
    written.append(plots / "accuracy_curve.csv")

    gap_rows = [
        [r["epoch"], _fmt(abs(float(r["train_accuracy"]) - float(r["val_accuracy"])))]
        for r in epoch_rows
    ]
    _write_csv(plots / "gap_curve.csv", ["epoch", "gap"], gap_rows)
    written.append(plots / "gap_curve.csv")

    by_stage: dict[str, dict[int, dict]] = {stage: {} for stage in CAPTURE_STAGES}
    with open(captures_file, newline="") as handle:
        for r in csv.DictReader(handle):
            entry = by_stage[r["stage"]].setdefault(
                int(r["sample"]),
                {"fitted": r["fitted"], "true": r["true"], "coords": {}},
            )
            entry["coords"][int(r["coordinate"])] = float(r["value"])

    for stage in CAPTURE_STAGES:
        samples = by_stage[stage]
        matrix = np.array(
            [
                [samples[i]["coords"][j] for j in sorted(samples[i]["coords"])]
                for i in sorted(samples)
            ]
        )
        k = min(2, matrix.shape[1])
        projected = pca_fit(matrix, k).projected
        if k == 1:
            projected = np.hstack([projected, np.zeros((len(projected), 1))])
        rows = [
            [
                _fmt(projected[i, 0]),
                _fmt(projected[i, 1]),
                samples[idx]["fitted"],
                samples[idx]["true"],
            ]
            for i, idx in enumerate(sorted(samples))
        ]
        path = plots / f"scatter_{stage}.csv"
        _write_csv(path, ["pc1", "pc2", "fitted", "true"], rows)
        written.append(path)
    return written
