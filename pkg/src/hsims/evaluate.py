"""Scoring of segmentations against ground truth with optimal label matching."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .io import GroundTruth


@dataclass
class EvalReport:
    confusion: np.ndarray     # (k_gt, k_pred) counts, rows = ground truth
    permutation: np.ndarray   # permutation[b] = matched gt id (1-based) for pred id b+1; 0 if unmatched
    oa: float
    aa: float
    kappa: float
    seed: int | None = None


def confusion_matrix(pred: np.ndarray, gt, k: int, k_gt: int | None = None) -> np.ndarray:
    """Counts ``C[a-1, b-1] = #{gt == a, pred == b}`` over labeled pixels (gt != 0).

    ``pred`` holds 1-based ids in ``1..k``.
    """
    gt_labels = gt.labels if isinstance(gt, GroundTruth) else np.asarray(gt)
    pred = np.asarray(pred)
    if pred.shape != gt_labels.shape:
        raise ValueError(f"prediction shape {pred.shape} does not match ground truth {gt_labels.shape}")
    if k_gt is None:
        k_gt = int(gt_labels.max()) if gt_labels.size else 0
    mask = gt_labels != 0
    p = pred[mask].astype(np.int64)
    g = gt_labels[mask].astype(np.int64)
    if p.size and (p.min() < 1 or p.max() > k):
        raise ValueError(f"predicted ids must lie in 1..{k}")
    if g.size and g.max() > k_gt:
        raise ValueError(f"ground-truth ids must lie in 0..{k_gt}")
    conf = np.zeros((k_gt, k), dtype=np.int64)
    np.add.at(conf, (g - 1, p - 1), 1)
    return conf


def _square(confusion: np.ndarray) -> np.ndarray:
    n = max(confusion.shape)
    out = np.zeros((n, n), dtype=confusion.dtype)
    out[: confusion.shape[0], : confusion.shape[1]] = confusion
    return out


def hungarian_match(confusion: np.ndarray) -> np.ndarray:
    """Column order maximizing the diagonal of the zero-padded square confusion matrix.

    Returns ``cols`` with ``cols[a]`` the (0-based) predicted class matched to
    ground-truth row ``a``.
    """
    sq = _square(np.asarray(confusion))
    rows, cols = linear_sum_assignment(sq, maximize=True)
    return cols[np.argsort(rows)]


def scores(confusion: np.ndarray, cols: np.ndarray) -> tuple[float, float, float]:
    """OA, AA and Cohen's kappa after reordering predicted classes by ``cols``."""
    m = _square(np.asarray(confusion))[:, cols].astype(np.float64)
    total = m.sum()
    if total == 0:
        raise ValueError("confusion matrix is empty")
    diag = np.diag(m)
    oa = diag.sum() / total
    rows = m.sum(axis=1)
    present = rows > 0
    aa = float(np.mean(diag[present] / rows[present]))
    p_e = float(np.sum(rows * m.sum(axis=0))) / total**2
    kappa = (oa - p_e) / (1.0 - p_e) if p_e < 1.0 else (1.0 if oa == 1.0 else 0.0)
    return float(oa), aa, float(kappa)


def evaluate(pred: np.ndarray, gt, k: int | None = None, seed: int | None = None) -> EvalReport:
    pred = np.asarray(pred)
    if k is None:
        k = int(pred.max())
    conf = confusion_matrix(pred, gt, k)
    cols = hungarian_match(conf)
    oa, aa, kappa = scores(conf, cols)
    perm = np.zeros(k, dtype=np.int64)
    for a, b in enumerate(cols):
        if b < k and a < conf.shape[0]:
            perm[b] = a + 1
    return EvalReport(confusion=conf, permutation=perm, oa=oa, aa=aa, kappa=kappa, seed=seed)
