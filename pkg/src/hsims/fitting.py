"""Fixed-point estimation of segment means and covariances under the robust indicator.

Setting the gradient of the segment energy to zero gives reweighting rules in
which every pixel is weighted by ``u / h`` with ``h = sqrt(mahalanobis^2 + eta)``;
far-away spectra get small weights, which is where the robustness comes from.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import HyperCube, LabelField
from .indicator import DEFAULT_ETA, SegmentModel, mahalanobis_sq


class EmptySegmentError(ValueError):
    """Raised when a segment has no (or zero total) membership."""


@dataclass(frozen=True)
class FixedPointConfig:
    eps: float
    eta: float = DEFAULT_ETA
    max_iter: int = 20
    tol: float = 1e-5

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if not self.eps > 0:
            raise ValueError("eps must be > 0")
        if not self.eta >= 0:
            raise ValueError("eta must be >= 0")


@dataclass(frozen=True)
class FitInfo:
    iterations: int
    last_change: float
    converged: bool


def _segment_data(cube, u, l):
    points = cube.pixels() if isinstance(cube, HyperCube) else np.asarray(cube, dtype=np.float64)
    data = u.data if isinstance(u, LabelField) else np.asarray(u, dtype=np.float64)
    weights = data[..., l].reshape(-1)
    if weights.size != points.shape[0]:
        raise ValueError("labeling and cube have different pixel counts")
    return points, weights


def weighted_stats(points: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Empirical mean and covariance with denominator ``sum(w) - 1``.

    A single-pixel segment gets a zero covariance.
    """
    total = weights.sum()
    if total <= 0:
        raise EmptySegmentError("segment is empty")
    mask = weights > 0
    pts, w = points[mask], weights[mask]
    mu = (w @ pts) / total
    centered = pts - mu
    dof = total - 1.0
    if dof <= 0:
        return mu, np.zeros((points.shape[1], points.shape[1]))
    sigma = (centered * w[:, None]).T @ centered / dof
    return mu, 0.5 * (sigma + sigma.T)


def init_segment_stats(cube, u, l: int) -> tuple[np.ndarray, np.ndarray]:
    """Initial ``(mu, sigma)`` of segment ``l`` (0-based channel) from a one-hot labeling."""
    points, weights = _segment_data(cube, u, l)
    return weighted_stats(points, weights)


def _step(points, weights, model: SegmentModel, eta: float):
    mask = weights > 0
    pts, w = points[mask], weights[mask]
    total = w.sum()
    if total <= 0:
        raise EmptySegmentError("segment is empty")
    h = np.sqrt(mahalanobis_sq(pts, model) + eta)
    a = w / h
    mu_next = (a @ pts) / a.sum()
    centered = pts - mu_next
    sigma_next = (centered * (a / 2.0)[:, None]).T @ centered / total
    return mu_next, 0.5 * (sigma_next + sigma_next.T)


def fixed_point_step(cube, u, l: int, model: SegmentModel, cfg: FixedPointConfig):
    """One reweighting update ``(mu_m, Sigma_eps_m) -> (mu_{m+1}, Sigma_{m+1})``.

    The weights use the current model; the covariance update is centered at
    the *new* mean. The returned covariance is unregularized.
    """
    points, weights = _segment_data(cube, u, l)
    return _step(points, weights, model, cfg.eta)


def _change(a: SegmentModel, b: SegmentModel) -> float:
    return float(
        np.linalg.norm(b.mu - a.mu)
        + np.linalg.norm(b.reg_stddevs - a.reg_stddevs)
        + np.linalg.norm(b.eigvecs - a.eigvecs)
    )


def fit_points(points, weights, cfg: FixedPointConfig, init=None) -> tuple[SegmentModel, FitInfo]:
    """Run the fixed-point iteration on weighted spectra ``points``."""
    points = np.asarray(points, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    mu, sigma = weighted_stats(points, weights) if init is None else init
    model = SegmentModel.from_moments(mu, sigma, cfg.eps)
    change = np.inf
    for it in range(1, cfg.max_iter + 1):
        mu_next, sigma_next = _step(points, weights, model, cfg.eta)
        nxt = SegmentModel.from_moments(mu_next, sigma_next, cfg.eps)
        change = _change(model, nxt)
        model = nxt
        if change < cfg.tol:
            return model, FitInfo(it, change, True)
    return model, FitInfo(cfg.max_iter, change, False)


def fit_segment(cube, u, l: int, cfg: FixedPointConfig, init=None, return_info: bool = False):
    """Fit segment ``l``; ``init`` is an optional warm start ``(mu, sigma)``."""
    points, weights = _segment_data(cube, u, l)
    model, info = fit_points(points, weights, cfg, init)
    return (model, info) if return_info else model


def segment_energy(points, weights, mu, sigma, eta: float = DEFAULT_ETA) -> float:
    """Data energy ``sum_p w_p (sqrt(b_p^T Sigma^-1 b_p + eta) + log det Sigma)`` of one segment."""
    b = np.asarray(points) - mu
    sol = np.linalg.solve(sigma, b.T).T
    q = np.einsum("nl,nl->n", b, sol)
    sign, logdet = np.linalg.slogdet(sigma)
    if sign <= 0:
        raise ValueError("covariance must have positive determinant")
    return float(np.sum(weights * (np.sqrt(q + eta) + logdet)))


def segment_gradients(points, weights, mu, sigma, eta: float = DEFAULT_ETA):
    """Analytic ``(dE/dmu, dE/dSigma)`` of :func:`segment_energy` at a symmetric positive definite ``sigma``."""
    points = np.asarray(points, dtype=np.float64)
    b = points - mu
    inv = np.linalg.inv(sigma)
    ib = b @ inv                       # rows Sigma^-1 b (Sigma symmetric)
    h = np.sqrt(np.einsum("nl,nl->n", b, ib) + eta)
    a = weights / h
    grad_mu = -(a @ ib)
    grad_sigma = -((ib * (a / 2.0)[:, None]).T @ ib) + weights.sum() * inv
    return grad_mu, grad_sigma
