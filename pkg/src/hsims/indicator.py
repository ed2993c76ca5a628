"""Regularized segment covariances and the robust anisotropic indicator.

For a segment with mean ``mu`` and covariance ``Sigma = U diag(s)^2 U^T`` the
indicator of a spectrum ``g`` is::

    sqrt(|| diag(s_eps)^-1 U^T (g - mu) ||^2 + eta) + log det Sigma_eps

where ``s_eps = max(s, eps)`` floors every standard deviation at ``eps``.
Both terms use the floored covariance, so the value is finite for every input.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import HyperCube

DEFAULT_ETA = 1e-2


def sorted_eigh(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix with a fixed convention.

    Eigenvalues come out descending and each eigenvector is signed so that
    its entry of largest magnitude is positive. Successive decompositions of
    nearby matrices are then directly comparable.
    """
    evals, evecs = np.linalg.eigh(matrix)
    evals, evecs = evals[::-1], evecs[:, ::-1]
    idx = np.argmax(np.abs(evecs), axis=0)
    signs = np.sign(evecs[idx, np.arange(evecs.shape[1])])
    signs[signs == 0] = 1.0
    return evals, evecs * signs


@dataclass(frozen=True)
class SegmentModel:
    mu: np.ndarray
    sigma: np.ndarray        # unregularized covariance
    eigvecs: np.ndarray      # columns, eigenvalues descending
    eig_stddevs: np.ndarray
    reg_stddevs: np.ndarray  # max(eig_stddevs, eps)
    log_det_reg: float
    eps: float

    @classmethod
    def from_moments(cls, mu, sigma, eps: float) -> "SegmentModel":
        mu = np.asarray(mu, dtype=np.float64)
        sigma = np.asarray(sigma, dtype=np.float64)
        if sigma.shape != (mu.size, mu.size):
            raise ValueError(f"covariance shape {sigma.shape} does not match mean of length {mu.size}")
        eigvecs, stddevs, reg, logdet = regularize_covariance(sigma, eps)
        return cls(mu=mu, sigma=0.5 * (sigma + sigma.T), eigvecs=eigvecs, eig_stddevs=stddevs,
                   reg_stddevs=reg, log_det_reg=logdet, eps=float(eps))

    @property
    def dim(self) -> int:
        return self.mu.size

    @property
    def reg_covariance(self) -> np.ndarray:
        return (self.eigvecs * self.reg_stddevs**2) @ self.eigvecs.T

    def whiten(self, points: np.ndarray) -> np.ndarray:
        """Rows ``diag(s_eps)^-1 U^T (g - mu)`` for each row ``g`` of ``points``."""
        return ((points - self.mu) @ self.eigvecs) / self.reg_stddevs


def regularize_covariance(sigma: np.ndarray, eps: float):
    """Floor the standard deviations of ``sigma`` at ``eps``.

    Returns ``(eigvecs, eig_stddevs, reg_stddevs, log_det_reg)``.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if not np.all(np.isfinite(sigma)):
        raise ValueError("covariance contains non-finite entries")
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    evals, evecs = sorted_eigh(0.5 * (sigma + sigma.T))
    stddevs = np.sqrt(np.clip(evals, 0.0, None))
    reg = np.maximum(stddevs, eps)
    log_det = float(np.sum(np.log(np.maximum(stddevs**2, eps**2))))
    return evecs, stddevs, reg, log_det


def mahalanobis_sq(points: np.ndarray, model: SegmentModel) -> np.ndarray:
    """Squared Mahalanobis distances of the rows of ``points`` under ``Sigma_eps``."""
    z = model.whiten(np.atleast_2d(points))
    return np.einsum("nl,nl->n", z, z)


def mahalanobis_sqrt(g, model: SegmentModel, eta: float = DEFAULT_ETA) -> float:
    g = np.asarray(g, dtype=np.float64)
    if g.shape != model.mu.shape:
        raise ValueError(f"spectrum of length {g.size} does not match model dimension {model.dim}")
    return float(np.sqrt(mahalanobis_sq(g[None, :], model)[0] + eta))


def indicator_value(g, model: SegmentModel, eta: float = DEFAULT_ETA) -> float:
    return mahalanobis_sqrt(g, model, eta) + model.log_det_reg


def indicator_values(points: np.ndarray, model: SegmentModel, eta: float = DEFAULT_ETA) -> np.ndarray:
    """Vectorized :func:`indicator_value` over the rows of ``points``."""
    return np.sqrt(mahalanobis_sq(points, model) + eta) + model.log_det_reg


def indicator_field(cube: HyperCube, models: Sequence[SegmentModel], eta: float = DEFAULT_ETA,
                    k: int | None = None) -> np.ndarray:
    """``H x W x k`` tensor of indicator values, one channel per segment model."""
    if k is not None and len(models) != k:
        raise ValueError(f"expected {k} segment models, got {len(models)}")
    if not models:
        raise ValueError("need at least one segment model")
    pixels = cube.pixels()
    out = np.empty((pixels.shape[0], len(models)))
    for l, model in enumerate(models):
        if model.dim != cube.bands:
            raise ValueError(f"model {l} has dimension {model.dim}, cube has {cube.bands} bands")
        out[:, l] = indicator_values(pixels, model, eta)
    return out.reshape(cube.height, cube.width, len(models))
