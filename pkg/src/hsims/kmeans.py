"""Seeded Lloyd k-means with k-means++ seeding, used to initialize the labeling."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import LabelField


@dataclass
class KmeansResult:
    labels: np.ndarray            # (N,) 1-based cluster ids
    centers: np.ndarray           # (k, L)
    inertia: float
    iterations: int
    inertia_history: list = field(default_factory=list)


def squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """``(N, k)`` matrix of squared Euclidean distances.

    Shared with the squared-Euclidean segmentation mode so both paths produce
    bit-identical assignments.
    """
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("nkl,nkl->nk", diff, diff)


def cluster_means(points: np.ndarray, labels0: np.ndarray, k: int, previous: np.ndarray) -> np.ndarray:
    """Per-cluster means for 0-based ``labels0``; empty clusters keep ``previous``."""
    centers = previous.copy()
    for c in range(k):
        members = points[labels0 == c]
        if len(members):
            centers[c] = members.sum(axis=0) / len(members)
    return centers


def kmeans_plusplus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest = squared_distances(points, centers[:1])[:, 0]
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            # all remaining points coincide with a chosen center
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers[c] = points[idx]
        closest = np.minimum(closest, squared_distances(points, centers[c : c + 1])[:, 0])
    return centers


def kmeans(
    data: np.ndarray,
    k: int,
    rng: np.random.Generator,
    max_iter: int = 300,
    init_centers: np.ndarray | None = None,
) -> KmeansResult:
    """Cluster the rows of ``data`` into ``k`` groups.

    Lloyd iterations stop once the assignment no longer changes or after
    ``max_iter`` assignment steps. A cluster left empty is re-seeded with the
    point farthest from its current center.
    """
    points = np.asarray(data, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError(f"data must be an (N, L) matrix, got shape {points.shape}")
    n = points.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n < k:
        raise ValueError(f"need at least k={k} points, got {n}")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")

    centers = kmeans_plusplus(points, k, rng) if init_centers is None else np.array(init_centers, dtype=np.float64)
    labels0 = None
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        dist = squared_distances(points, centers)
        new_labels = np.argmin(dist, axis=1)
        history.append(float(dist[np.arange(n), new_labels].sum()))
        if labels0 is not None and np.array_equal(new_labels, labels0):
            break
        labels0 = new_labels
        centers = cluster_means(points, labels0, k, centers)
        _reseed_empty(points, labels0, centers, k)
    inertia = float(squared_distances(points, centers)[np.arange(n), labels0].sum())
    return KmeansResult(labels=labels0 + 1, centers=centers, inertia=inertia, iterations=it, inertia_history=history)


def _reseed_empty(points, labels0, centers, k):
    """Move the center of every empty cluster onto the point farthest from its own center."""
    counts = np.bincount(labels0, minlength=k)
    if np.all(counts > 0):
        return
    diff = points - centers[labels0]
    own = np.einsum("nl,nl->n", diff, diff)
    for c in np.flatnonzero(counts == 0):
        idx = int(np.argmax(own))
        centers[c] = points[idx]
        own[idx] = -np.inf


def labels_to_field(labels: np.ndarray, height: int, width: int, k: int) -> LabelField:
    """One-hot labeling from 1-based class ids in row-major pixel order."""
    labels = np.asarray(labels).reshape(-1)
    if labels.size != height * width:
        raise ValueError(f"expected {height * width} labels, got {labels.size}")
    if labels.size and (labels.min() < 1 or labels.max() > k):
        raise ValueError(f"labels must lie in 1..{k}")
    onehot = np.zeros((height * width, k))
    onehot[np.arange(labels.size), labels.astype(np.int64) - 1] = 1.0
    return LabelField(onehot.reshape(height, width, k))
