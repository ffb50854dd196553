"""Similarity metrics, class-centroid galleries, and probe ranking.

Distances follow the "smaller is better" contract for all four metrics;
cosine similarity is therefore returned as 1 - cos.  Mahalanobis weights
squared coordinate differences by the model's retained eigenvalue
spectrum, the natural subspace-coordinate reading of the metric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DimensionError

METRIC_KINDS = ("l1", "l2", "cosine", "mahalanobis")

_ZERO_NORM = 1e-15


@dataclass(frozen=True)
class Metric:
    """Distance choice; mahalanobis carries the eigenvalue weights."""

    kind: str
    eigenvalues: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise ContractError(f"unknown metric kind {self.kind!r}")
        if self.kind == "mahalanobis":
            if self.eigenvalues is None:
                raise ContractError("mahalanobis needs an eigenvalue vector")
            vals = np.asarray(self.eigenvalues, dtype=np.float64)
            if vals.ndim != 1 or not np.all(vals > 0):
                raise ContractError("mahalanobis eigenvalues must be strictly positive")
            object.__setattr__(self, "eigenvalues", vals)


@dataclass
class GalleryIndex:
    """Per-class centroids of projected training samples."""

    centroids: np.ndarray  # (t, C)
    class_ids: np.ndarray  # (C,)
    source: str = ""


@dataclass
class RankedList:
    """All gallery classes ordered best-first for one probe."""

    probe_id: int
    class_ids: np.ndarray
    distances: np.ndarray

    def __post_init__(self):
        if self.class_ids.shape != self.distances.shape:
            raise DimensionError("class_ids and distances must align")
        if np.any(np.diff(self.distances) < 0):
            raise ContractError("distances must be non-decreasing along the ranking")
        if np.unique(self.class_ids).size != self.class_ids.size:
            raise ContractError("every gallery class must appear exactly once")


def distances_to(points: np.ndarray, probe: np.ndarray, metric: Metric) -> np.ndarray:
    """Distance from one probe vector to each column of points."""
    points = np.asarray(points, dtype=np.float64)
    probe = np.asarray(probe, dtype=np.float64).ravel()
    if points.shape[0] != probe.shape[0]:
        raise DimensionError(
            f"vector length {probe.shape[0]} does not match points rows {points.shape[0]}"
        )
    diff = points - probe[:, None]
    if metric.kind == "l1":
        return np.sum(np.abs(diff), axis=0)
    if metric.kind == "l2":
        return np.sqrt(np.sum(diff * diff, axis=0))
    if metric.kind == "mahalanobis":
        lam = metric.eigenvalues
        if lam.shape[0] != probe.shape[0]:
            raise DimensionError("mahalanobis eigenvalue vector length mismatch")
        return np.sqrt(np.sum(diff * diff / lam[:, None], axis=0))
    # cosine distance with an explicit zero-norm rule to avoid NaNs:
    # both degenerate -> 0, exactly one degenerate -> 1
    norm_p = np.sqrt(np.sum(probe * probe))
    norms = np.sqrt(np.sum(points * points, axis=0))
    out = np.empty(points.shape[1])
    both = (norms < _ZERO_NORM) & (norm_p < _ZERO_NORM)
    either = (norms < _ZERO_NORM) | (norm_p < _ZERO_NORM)
    ok = ~either
    out[both] = 0.0
    out[either & ~both] = 1.0
    if np.any(ok):
        out[ok] = 1.0 - (points[:, ok].T @ probe) / (norms[ok] * norm_p)
    return out


def distance(a: np.ndarray, b: np.ndarray, metric: Metric) -> float:
    """Distance between two coefficient vectors under the chosen metric."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(distances_to(b[:, None], a, metric)[0])


def build_gallery(
    train_coeffs: np.ndarray,
    labels: np.ndarray,
    source: str = "",
) -> GalleryIndex:
    """Arithmetic per-class centroids of the projected training set."""
    train_coeffs = np.asarray(train_coeffs, dtype=np.float64)
    labels = np.asarray(labels)
    if train_coeffs.ndim != 2 or labels.shape[0] != train_coeffs.shape[1]:
        raise DimensionError("need a t x M coefficient matrix and M labels")
    classes = np.unique(labels)
    if classes.size == 0:
        raise ContractError("gallery needs at least one class")
    centroids = np.stack(
        [train_coeffs[:, labels == c].mean(axis=1) for c in classes], axis=1
    )
    return GalleryIndex(centroids=centroids, class_ids=classes.astype(np.int64), source=source)


def rank_classes(
    gallery: GalleryIndex,
    probe: np.ndarray,
    metric: Metric,
    probe_id: int = -1,
) -> RankedList:
    """Order every gallery class by ascending distance to its centroid.

    Ties break by ascending class id, keeping rankings deterministic.
    """
    d = distances_to(gallery.centroids, probe, metric)
    order = np.lexsort((gallery.class_ids, d))
    return RankedList(
        probe_id=probe_id,
        class_ids=gallery.class_ids[order],
        distances=d[order],
    )


def classify(gallery: GalleryIndex, probe: np.ndarray, metric: Metric) -> int:
    """Nearest-centroid decision: the top entry of the ranked list."""
    return int(rank_classes(gallery, probe, metric).class_ids[0])
