"""Alternating minimization: segment statistics, labeling update, thresholding."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import HyperCube, LabelField, make_rng
from .fitting import FixedPointConfig, fit_points, weighted_stats
from .indicator import DEFAULT_ETA, SegmentModel, indicator_field
from .kmeans import cluster_means, kmeans, labels_to_field, squared_distances
from .pdhg import PdhgConfig, grid_step, solve_labeling, total_variation

log = logging.getLogger(__name__)


class IndicatorMode(str, Enum):
    ROBUST_ANISOTROPIC = "robust_anisotropic"
    SQUARED_EUCLIDEAN = "squared_euclidean"


@dataclass(frozen=True)
class PipelineConfig:
    k: int
    lam: float
    eps: float | None = None
    eta: float = DEFAULT_ETA
    outer_max: int = 20
    outer_tol: float = 1e-6
    seed: int = 0
    indicator_mode: IndicatorMode = IndicatorMode.ROBUST_ANISOTROPIC
    mnf_kept: int | None = None
    pdhg_max_iter: int = 1000
    pdhg_tol: float = 1e-6
    fp_max_iter: int = 20
    fp_tol: float = 1e-5
    kmeans_max_iter: int = 300

    def __post_init__(self):
        object.__setattr__(self, "indicator_mode", IndicatorMode(self.indicator_mode))
        if self.k < 2:
            raise ValueError(f"k must be >= 2, got {self.k}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.indicator_mode is IndicatorMode.ROBUST_ANISOTROPIC and not (self.eps is not None and self.eps > 0):
            raise ValueError("eps must be > 0 for the robust anisotropic indicator")
        if not self.eta >= 0:
            raise ValueError("eta must be >= 0")
        for name in ("outer_max", "pdhg_max_iter", "fp_max_iter", "kmeans_max_iter"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("outer_tol", "pdhg_tol", "fp_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def robust(self) -> bool:
        return self.indicator_mode is IndicatorMode.ROBUST_ANISOTROPIC

    def fixed_point(self) -> FixedPointConfig:
        return FixedPointConfig(eps=self.eps, eta=self.eta, max_iter=self.fp_max_iter, tol=self.fp_tol)

    def pdhg(self) -> PdhgConfig:
        return PdhgConfig(lam=self.lam, max_iter=self.pdhg_max_iter, tol=self.pdhg_tol)


def threshold(u) -> LabelField:
    """One-hot of the smallest index attaining the per-pixel maximum."""
    data = u.data if isinstance(u, LabelField) else np.asarray(u, dtype=np.float64)
    c = np.argmax(data, axis=-1)
    out = np.zeros_like(data)
    np.put_along_axis(out, c[..., None], 1.0, axis=-1)
    return LabelField(out)


def stop_value(u_curr, mu_curr: np.ndarray, mu_prev: np.ndarray) -> float:
    """``sum_l (|segment l| / HW) * ||mu_l - mu_l_prev||_inf``."""
    data = u_curr.data if isinstance(u_curr, LabelField) else np.asarray(u_curr)
    frac = data.reshape(-1, data.shape[-1]).sum(axis=0) / (data.shape[0] * data.shape[1])
    change = np.max(np.abs(np.asarray(mu_curr) - np.asarray(mu_prev)), axis=1)
    return float(np.sum(frac * change))


def outer_stop(u_curr, mu_curr, mu_prev, tol: float) -> bool:
    return stop_value(u_curr, mu_curr, mu_prev) < tol


def indicator_field_ms2(cube: HyperCube, means: np.ndarray) -> np.ndarray:
    """Squared Euclidean distance of every pixel to every segment mean."""
    means = np.atleast_2d(np.asarray(means, dtype=np.float64))
    return squared_distances(cube.pixels(), means).reshape(cube.height, cube.width, -1)


def objective(u, f_eta: np.ndarray, lam: float) -> float:
    """``sum(u * f) + lambda * TV(u)`` on the image grid."""
    data = u.data if isinstance(u, LabelField) else np.asarray(u)
    h = grid_step(data.shape[0], data.shape[1])
    return float(np.sum(data * f_eta)) + lam * total_variation(data, h)


@dataclass
class IterationRecord:
    iteration: int
    objective: float
    sizes: list
    stop_value: float
    pdhg_iterations: int
    fp_iterations: list = field(default_factory=list)


@dataclass
class SegmentationResult:
    u: LabelField
    means: np.ndarray                       # (k, L)
    models: list | None                     # SegmentModel per segment, robust mode only
    trace: list
    converged: bool

    @property
    def labels(self) -> np.ndarray:
        """1-based ``H x W`` class map."""
        return self.u.hard_labels()


def _argmin_onehot(f_eta: np.ndarray) -> np.ndarray:
    c = np.argmin(f_eta, axis=-1)
    out = np.zeros_like(f_eta)
    np.put_along_axis(out, c[..., None], 1.0, axis=-1)
    return out


def segment(cube: HyperCube, cfg: PipelineConfig, init_labels: np.ndarray | None = None,
            callback=None) -> SegmentationResult:
    """Segment ``cube`` into ``cfg.k`` regions.

    The cube is used as given; normalization and MNF reduction happen upstream.
    ``init_labels`` (1-based, row-major) replaces the k-means initialization.
    With ``cfg.lam == 0`` the labeling step reduces to a per-pixel argmin of the
    indicator, the exact minimizer of the data term.
    """
    H, W, k = cube.height, cube.width, cfg.k
    points = cube.pixels()
    if points.shape[0] < k:
        raise ValueError(f"image has {points.shape[0]} pixels, fewer than k={k}")

    if init_labels is None:
        km = kmeans(points, k, make_rng(cfg.seed), max_iter=cfg.kmeans_max_iter)
        init_labels = km.labels
    u = labels_to_field(init_labels, H, W, k)
    labels0 = np.asarray(init_labels).reshape(-1) - 1

    fp_cfg = cfg.fixed_point() if cfg.robust else None
    pd_cfg = cfg.pdhg() if cfg.lam > 0 else None

    means = cluster_means(points, labels0, k, np.zeros((k, cube.bands)))
    models: list[SegmentModel | None] = [None] * k
    moments: list = [None] * k
    if cfg.robust:
        for l in range(k):
            w = u.data[..., l].reshape(-1)
            if w.sum() > 0:
                moments[l] = weighted_stats(points, w)
                models[l] = SegmentModel.from_moments(*moments[l], cfg.eps)
                means[l] = moments[l][0]
        if any(m is None for m in models):
            raise ValueError("initialization produced an empty segment")

    p = None
    trace: list[IterationRecord] = []
    converged = False
    mu_prev = None
    for it in range(1, cfg.outer_max + 1):
        fp_iters = []
        if cfg.robust:
            for l in range(k):
                w = u.data[..., l].reshape(-1)
                if w.sum() <= 0:
                    fp_iters.append(0)  # empty segment: model stays frozen
                    continue
                model, info = fit_points(points, w, fp_cfg, init=moments[l])
                models[l] = model
                moments[l] = (model.mu, model.sigma)
                means[l] = model.mu
                fp_iters.append(info.iterations)
            f_eta = indicator_field(cube, models, cfg.eta)
        else:
            means = cluster_means(points, np.argmax(u.data, axis=-1).reshape(-1), k, means)
            f_eta = indicator_field_ms2(cube, means)

        if pd_cfg is None:
            relaxed, pd_iters = _argmin_onehot(f_eta), 0
        else:
            res = solve_labeling(u, f_eta, pd_cfg, p0=p)
            relaxed, p, pd_iters = res.u, res.p, res.iterations
        u = threshold(relaxed)

        sizes = u.data.reshape(-1, k).sum(axis=0).astype(int).tolist()
        # statistics of two consecutive loop iterations are compared; in the
        # squared-Euclidean mode the first update merely reproduces the init
        value = np.inf if mu_prev is None else stop_value(u, means, mu_prev)
        mu_prev = means.copy()
        record = IterationRecord(it, objective(u, f_eta, cfg.lam), sizes, value, pd_iters, fp_iters)
        trace.append(record)
        log.info("iter %d  E=%.6g  stop=%.3g  sizes=%s", it, record.objective, value, sizes)
        if callback is not None:
            callback(record)
        if sum(s > 0 for s in sizes) == 1:
            warnings.warn("all pixels were assigned to a single segment", RuntimeWarning, stacklevel=2)
        if value < cfg.outer_tol:
            converged = True
            break

    return SegmentationResult(u=u, means=means, models=models if cfg.robust else None,
                              trace=trace, converged=converged)
