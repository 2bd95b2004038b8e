"""Scalar health metrics computed from a logged accuracy series.

All functions take the (epoch, train, val) series produced by the
training loop and reduce it to diagnostic numbers: generalization gap,
early learning slope, peak-to-final drop, epoch-to-epoch fluctuation
statistics, the val/train fluctuation ratio, and the first epoch at
which validation accuracy clears a threshold.  Metrics that can be
undefined (no epoch over threshold, zero train fluctuation) come back
as None and serialize as absent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .training import AccuracySeries

DEFAULT_THRESHOLD = 0.9
DEFAULT_SLOPE_WINDOW = 5


def generalization_gap(series: AccuracySeries) -> tuple[float, float]:
    """(final |train - val|, mean per-epoch |train - val|)."""
    gaps = np.abs(series.train - series.val)
    return float(gaps[-1]), float(gaps.mean())


def early_slope(series: AccuracySeries, k: int = DEFAULT_SLOPE_WINDOW) -> float:
    """Average per-epoch validation gain over the first k logged epochs."""
    if k < 2:
        raise ValueError("slope window needs at least two epochs")
    if len(series) < k:
        raise ValueError(f"series has {len(series)} epochs, window needs {k}")
    return float((series.val[k - 1] - series.val[0]) / (k - 1))


def overfitting_drop(series: AccuracySeries) -> float:
    """Peak validation accuracy minus final validation accuracy."""
    return float(series.val.max() - series.val[-1])


def fluctuation(series: AccuracySeries, which: str) -> tuple[float, float]:
    """(mu, sigma) of |A(t+1) - A(t)| for the chosen curve.

    sigma is the population standard deviation over the T-1 observed
    differences of a length-T series.
    """
    if which not in ("train", "val"):
        raise ValueError(f"curve must be 'train' or 'val', got {which!r}")
    curve = series.train if which == "train" else series.val
    if len(curve) < 2:
        raise ValueError("fluctuation needs at least two epochs")
    steps = np.abs(np.diff(curve))
    return float(steps.mean()), float(steps.std())


def stability_ratio(series: AccuracySeries) -> float | None:
    """Validation-to-train ratio of mean fluctuation; None if train is flat."""
    train_mu, _ = fluctuation(series, "train")
    val_mu, _ = fluctuation(series, "val")
    if train_mu == 0.0:
        return None
    return val_mu / train_mu


def epoch_at_threshold(
    series: AccuracySeries, threshold: float = DEFAULT_THRESHOLD
) -> int | None:
    """First epoch whose validation accuracy reaches the threshold."""
    hits = np.flatnonzero(series.val >= threshold)
    if len(hits) == 0:
        return None
    return int(series.epochs[hits[0]])


@dataclass(frozen=True)
class MetricReport:
    final_train: float
    final_val: float
    final_gap: float
    mean_gap: float
    early_slope: float
    overfitting_drop: float
    epoch_at_threshold: int | None
    train_mu_delta: float
    train_sigma_delta: float
    val_mu_delta: float
    val_sigma_delta: float
    stability_ratio: float | None

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def csv_row(self) -> list[str]:
        out = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                out.append("")
            elif isinstance(value, int):
                out.append(str(value))
            else:
                out.append(repr(float(value)))
        return out


METRIC_FIELDS = tuple(f.name for f in fields(MetricReport))


def compute_metrics(
    series: AccuracySeries,
    slope_window: int = DEFAULT_SLOPE_WINDOW,
    threshold: float = DEFAULT_THRESHOLD,
) -> MetricReport:
    """Full report over one series; needs at least slope_window epochs."""
    final_gap, mean_gap = generalization_gap(series)
    train_mu, train_sigma = fluctuation(series, "train")
    val_mu, val_sigma = fluctuation(series, "val")
    return MetricReport(
        final_train=float(series.train[-1]),
        final_val=float(series.val[-1]),
        final_gap=final_gap,
        mean_gap=mean_gap,
        early_slope=early_slope(series, slope_window),
        overfitting_drop=overfitting_drop(series),
        epoch_at_threshold=epoch_at_threshold(series, threshold),
        train_mu_delta=train_mu,
        train_sigma_delta=train_sigma,
        val_mu_delta=val_mu,
        val_sigma_delta=val_sigma,
        stability_ratio=stability_ratio(series),
    )
