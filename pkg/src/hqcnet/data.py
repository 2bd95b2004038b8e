"""Bivariate pair data: heatmap construction, file IO, synthetic generator.

A sample is a pair of equal-length series (x, y) tagged with a causal
direction label: "positive" (x drives y), "negative" (y drives x), or
"none" (no dependence).  The model never sees the raw series; each pair
becomes a normalized 8x8 joint histogram whose cells are scaled by the
maximum count, so every non-empty heatmap peaks at exactly 1.

The synthetic generator substitutes for an external pair corpus at desk
scale: positive pairs follow y = f(x) + noise for a curve family drawn
per seed, negative pairs are the same construction with roles swapped
(their heatmaps are exact transposes), and "none" pairs are independent
draws with the same marginal distributions as the functional pairs, so
no single-axis statistic separates the classes.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LABELS = ("positive", "negative", "none")
LABEL_TO_INDEX = {name: i for i, name in enumerate(LABELS)}

# pair-table files use the conventional numeric coding
_FILE_CODE_TO_LABEL = {"1": "positive", "-1": "negative", "0": "none"}
_LABEL_TO_FILE_CODE = {"positive": "1", "negative": "-1", "none": "0"}

_CACHE_MAGIC = b"HQCHMAP\x00"
_CACHE_VERSION = 1


class DataFormatError(ValueError):
    """Raised when an external data file cannot be parsed."""


@dataclass(frozen=True)
class PairSample:
    x: np.ndarray
    y: np.ndarray
    label: str

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.x.ndim != 1 or self.x.shape != self.y.shape:
            raise ValueError(
                f"series must be equal-length vectors, got {self.x.shape} / {self.y.shape}"
            )
        if self.x.size < 2:
            raise ValueError("a pair needs at least 2 points")
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}; choose from {LABELS}")


@dataclass(frozen=True)
class HeatmapSample:
    grid: np.ndarray
    label: str

    def __post_init__(self):
        object.__setattr__(self, "grid", np.asarray(self.grid, dtype=float))
        if self.grid.ndim != 2 or self.grid.shape[0] != self.grid.shape[1]:
            raise ValueError(f"grid must be square, got {self.grid.shape}")
        if self.grid.min() < 0.0 or self.grid.max() > 1.0:
            raise ValueError("grid entries must lie in [0, 1]")
        if self.grid.any() and self.grid.max() != 1.0:
            raise ValueError("non-empty grid must peak at exactly 1")
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")


def _bin_indices(values: np.ndarray, bins: int) -> np.ndarray:
    """Equal-width bins spanning [min, max]; a flat axis maps to bin 0."""
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return np.zeros(values.size, dtype=int)
    scaled = (values - lo) / (hi - lo) * bins
    return np.clip(scaled.astype(int), 0, bins - 1)


def build_heatmap(pair: PairSample, bins: int = 8) -> HeatmapSample:
    """Joint histogram of (x, y), normalized by the maximum cell count.

    grid[i, j] covers x-bin i and y-bin j.
    """
    if bins < 1:
        raise ValueError("bins must be positive")
    if pair.x.size == 0:
        raise ValueError("empty series")
    xi = _bin_indices(pair.x, bins)
    yj = _bin_indices(pair.y, bins)
    counts = np.zeros((bins, bins))
    np.add.at(counts, (xi, yj), 1.0)
    return HeatmapSample(counts / counts.max(), pair.label)


# ---------------------------------------------------------------------------
# Pair-table files

def write_pairs(path, samples: list[PairSample]) -> None:
    """Delimited pair table: header id,x,y,label; series space-separated."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "x", "y", "label"])
        for k, s in enumerate(samples):
            writer.writerow([
                f"pair{k}",
                " ".join(repr(float(v)) for v in s.x),
                " ".join(repr(float(v)) for v in s.y),
                _LABEL_TO_FILE_CODE[s.label],
            ])


def load_pairs(path) -> list[PairSample]:
    """Parse a pair table written by write_pairs (or hand-authored)."""
    samples = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        expected = ["id", "x", "y", "label"]
        if [h.strip().lower() for h in header] != expected:
            raise DataFormatError(
                f"{path}: line 1: header must be {','.join(expected)}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise DataFormatError(
                    f"{path}: line {line_no}: expected 4 fields, got {len(row)}"
                )
            _, x_field, y_field, code = row
            if code.strip() not in _FILE_CODE_TO_LABEL:
                raise DataFormatError(
                    f"{path}: line {line_no}: unknown label code {code!r}"
                )
            try:
                x = np.array([float(v) for v in x_field.split()])
                y = np.array([float(v) for v in y_field.split()])
            except ValueError as err:
                raise DataFormatError(f"{path}: line {line_no}: {err}") from None
            try:
                samples.append(PairSample(x, y, _FILE_CODE_TO_LABEL[code.strip()]))
            except ValueError as err:
                raise DataFormatError(f"{path}: line {line_no}: {err}") from None
    return samples


# ---------------------------------------------------------------------------
# Synthetic generator

def _draw_curve(rng: np.random.Generator):
    """Pick one function family and its parameters."""
    family = rng.integers(3)
    if family == 0:  # quadratic
        a = rng.uniform(1.0, 2.0) * rng.choice([-1.0, 1.0])
        h = rng.uniform(-0.3, 0.3)
        c = rng.uniform(-0.3, 0.3)
        return lambda x: a * (x - h) ** 2 + c
    if family == 1:  # sine
        omega = rng.uniform(2.5, 4.5)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        return lambda x: np.sin(omega * x + phase)
    # piecewise-linear hinge; opposite slope signs keep the curve
    # non-monotonic, so a pair is never confusable with its transpose
    t = rng.uniform(-0.4, 0.4)
    flip = rng.choice([-1.0, 1.0])
    s1 = -flip * rng.uniform(0.8, 2.0)
    s2 = flip * rng.uniform(0.8, 2.0)
    return lambda x: np.where(x < t, s1 * (x - t), s2 * (x - t))


def _functional_pair(n_points: int, rng: np.random.Generator):
    x = rng.uniform(-1.0, 1.0, n_points)
    f = _draw_curve(rng)
    y = f(x) + rng.normal(0.0, 0.05, n_points)
    return x, y


def synth_generate(n_points: int, label: str, seed: int) -> PairSample:
    """One synthetic pair; identical (label, seed) gives identical data.

    positive and negative with the same seed use the same underlying
    curve with roles swapped, so their heatmaps are exact transposes.
    A "none" pair keeps one uniform axis and one curve-output axis but
    draws them independently (the curve is evaluated on a hidden third
    series), which destroys the joint structure without touching the
    marginals; half the pairs are axis-swapped so the class has no
    preferred orientation.
    """
    if n_points < 32:
        raise ValueError("need at least 32 points per pair")
    if label not in LABELS:
        raise ValueError(f"unknown label {label!r}; choose from {LABELS}")
    rng = np.random.default_rng(seed)
    if label == "none":
        _, y = _functional_pair(n_points, rng)
        x = rng.uniform(-1.0, 1.0, n_points)
        if rng.random() < 0.5:
            x, y = y, x
        return PairSample(x, y, "none")
    x, y = _functional_pair(n_points, rng)
    if label == "positive":
        return PairSample(x, y, "positive")
    return PairSample(y, x, "negative")


def synth_dataset(n_samples: int, n_points: int, seed: int) -> list[PairSample]:
    """Balanced 3-class corpus; sample k gets child seed k of the root."""
    if n_samples < 3:
        raise ValueError("need at least one sample per class")
    children = np.random.SeedSequence(seed).spawn(n_samples)
    return [
        synth_generate(n_points, LABELS[k % 3], children[k])
        for k in range(n_samples)
    ]


# ---------------------------------------------------------------------------
# Splitting

def split(dataset: list, ratio: float, seed: int) -> tuple[list, list]:
    """Label-stratified split into (train, validation).

    Deterministic under seed; every class must land at least one sample
    on each side.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    train: list = []
    val: list = []
    for label in LABELS:
        stratum = [s for s in dataset if s.label == label]
        if not stratum:
            raise DataFormatError(f"no samples with label {label!r}")
        order = rng.permutation(len(stratum))
        n_train = int(round(ratio * len(stratum)))
        if n_train == 0 or n_train == len(stratum):
            raise DataFormatError(
                f"ratio {ratio} empties one side of the {label!r} stratum"
            )
        train.extend(stratum[i] for i in order[:n_train])
        val.extend(stratum[i] for i in order[n_train:])
    return train, val


# ---------------------------------------------------------------------------
# Heatmap cache

def write_heatmap_cache(path, samples: list[HeatmapSample]) -> None:
    """Binary cache: magic, version byte, count, then per-record 64
    float64 cell values (row-major) plus one label byte."""
    with open(path, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(struct.pack("<BI", _CACHE_VERSION, len(samples)))
        for s in samples:
            if s.grid.shape != (8, 8):
                raise ValueError("cache stores 8x8 grids only")
            fh.write(struct.pack("<64d", *s.grid.ravel()))
            fh.write(struct.pack("<B", LABEL_TO_INDEX[s.label]))


def read_heatmap_cache(path) -> list[HeatmapSample]:
    raw = Path(path).read_bytes()
    if raw[: len(_CACHE_MAGIC)] != _CACHE_MAGIC:
        raise DataFormatError(f"{path}: bad magic, not a heatmap cache")
    offset = len(_CACHE_MAGIC)
    version, count = struct.unpack_from("<BI", raw, offset)
    if version != _CACHE_VERSION:
        raise DataFormatError(f"{path}: unsupported cache version {version}")
    offset += struct.calcsize("<BI")
    record = struct.calcsize("<64d") + 1
    if len(raw) != offset + count * record:
        raise DataFormatError(f"{path}: truncated cache")
    samples = []
    for _ in range(count):
        cells = struct.unpack_from("<64d", raw, offset)
        offset += struct.calcsize("<64d")
        label_idx = raw[offset]
        offset += 1
        if label_idx >= len(LABELS):
            raise DataFormatError(f"{path}: bad label byte {label_idx}")
        samples.append(HeatmapSample(np.array(cells).reshape(8, 8), LABELS[label_idx]))
    return samples
