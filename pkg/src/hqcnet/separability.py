"""Cluster-separability analysis: PCA projection and silhouette scores.

PCA diagonalizes the covariance of mean-centered points and reports
explained-variance ratios for the full spectrum plus the projection
onto the leading k axes.  Silhouette scores compare each point's mean
within-cluster distance against its nearest other cluster; the mean
score summarizes how separable a labeled embedding is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PCAResult:
    mean: np.ndarray
    components: np.ndarray
    explained_variance_ratios: np.ndarray
    projected: np.ndarray
    degenerate: bool

    def transform(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return (points - self.mean) @ self.components.T


def pca_fit(points: np.ndarray, k: int) -> PCAResult:
    """Top-k principal axes of an (n, d) point cloud.

    Ratios cover all d axes in descending order and sum to one unless
    the cloud has zero variance, in which case they are all zero and
    the result is flagged degenerate.  Each component's largest-moduli
    coordinate is made positive to fix the eigenvector sign.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ValueError(f"expected (n, d) matrix, got shape {points.shape}")
    n, d = points.shape
    if n < 2:
        raise ValueError("need at least two points")
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k}")

    mean = points.mean(axis=0)
    centered = points - mean
    cov = centered.T @ centered / (n - 1)
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    axes = eigenvectors[:, order].T

    for row in axes:
        pivot = np.argmax(np.abs(row))
        if row[pivot] < 0:
            row *= -1.0

    total = eigenvalues.sum()
    degenerate = total == 0.0
    ratios = np.zeros(d) if degenerate else eigenvalues / total

    components = axes[:k]
    return PCAResult(
        mean=mean,
        components=components,
        explained_variance_ratios=ratios,
        projected=centered @ components.T,
        degenerate=degenerate,
    )


def silhouette_scores(points: np.ndarray, labels) -> tuple[np.ndarray, float]:
    """Per-point silhouette values and their mean.

    a(i) averages distances to the point's own cluster (divisor
    |C|-1); b(i) is the smallest mean distance to any other cluster;
    s(i) = (b-a)/max(a,b).  Singleton clusters score zero, as do
    points whose a and b both vanish.
    """
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels)
    if points.ndim != 2:
        raise ValueError(f"expected (n, d) matrix, got shape {points.shape}")
    if labels.shape != (points.shape[0],):
        raise ValueError("labels must align with points")
    unique = np.unique(labels)
    if len(unique) < 2:
        raise ValueError("silhouette needs at least two clusters")

    diffs = points[:, None, :] - points[None, :, :]
    distances = np.sqrt((diffs**2).sum(axis=-1))
    masks = {c: labels == c for c in unique}
    sizes = {c: int(masks[c].sum()) for c in unique}

    scores = np.zeros(len(points))
    for i, c in enumerate(labels):
        if sizes[c] == 1:
            continue
        a = distances[i, masks[c]].sum() / (sizes[c] - 1)
        b = min(
            distances[i, masks[other]].mean() for other in unique if other != c
        )
        denom = max(a, b)
        if denom > 0.0:
            scores[i] = (b - a) / denom
    return scores, float(scores.mean())
