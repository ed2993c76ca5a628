"""Intensity normalization and the minimum noise fraction (MNF) transform."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import HyperCube

# Var(n1 - n2) = 2 * Var(n) for independent, identically distributed noise.
NOISE_DIFF_SCALE = 0.5


class DegenerateInputError(ValueError):
    pass


def normalize_cube(cube: HyperCube) -> HyperCube:
    """Map intensities to [0, 1]: subtract the global minimum, divide by the resulting maximum."""
    shifted = cube.data - cube.data.min()
    top = shifted.max()
    if top == 0:
        raise DegenerateInputError("cannot normalize a constant cube")
    return HyperCube(shifted / top)


def estimate_noise_covariance(cube: HyperCube, scale: float = NOISE_DIFF_SCALE) -> np.ndarray:
    """Noise covariance from differences of each pixel to its lower-right neighbor.

    Returns ``scale * mean(d d^T)`` over ``d = g[i, j] - g[i+1, j+1]``; the
    differences are not mean-centered.
    """
    if cube.height < 2 or cube.width < 2:
        raise DegenerateInputError(
            f"noise estimation needs a grid of at least 2x2, got {cube.height}x{cube.width}"
        )
    d = (cube.data[:-1, :-1] - cube.data[1:, 1:]).reshape(-1, cube.bands)
    cov = scale * (d.T @ d) / d.shape[0]
    return 0.5 * (cov + cov.T)


def data_covariance(pixels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and (population) covariance of the rows of ``pixels``."""
    mean = pixels.mean(axis=0)
    centered = pixels - mean
    cov = centered.T @ centered / pixels.shape[0]
    return mean, 0.5 * (cov + cov.T)


def _orient_columns(vectors: np.ndarray) -> np.ndarray:
    """Flip column signs so the entry of largest magnitude is positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def regularize_noise_covariance(noise_cov: np.ndarray) -> np.ndarray:
    """Add a trace-scaled ridge when the noise covariance is not positive definite."""
    noise_cov = 0.5 * (noise_cov + noise_cov.T)
    n = noise_cov.shape[0]
    if np.linalg.eigvalsh(noise_cov)[0] <= 0:
        delta = 1e-10 * np.trace(noise_cov) / n
        if delta <= 0:
            delta = 1e-10
        noise_cov = noise_cov + delta * np.eye(n)
    return noise_cov


def mnf_basis(signal_cov: np.ndarray, noise_cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Simultaneously diagonalize ``signal_cov`` and ``noise_cov``.

    Returns ``(W, snrs)`` with ``W.T @ noise_cov @ W = I`` and
    ``W.T @ signal_cov @ W = diag(snrs)``, ``snrs`` descending. ``noise_cov``
    must be positive definite.
    """
    evals, evecs = np.linalg.eigh(0.5 * (noise_cov + noise_cov.T))
    if evals[0] <= 0:
        raise np.linalg.LinAlgError("noise covariance is not positive definite")
    whiten = evecs / np.sqrt(evals)
    white_signal = whiten.T @ signal_cov @ whiten
    snrs, rot = np.linalg.eigh(0.5 * (white_signal + white_signal.T))
    order = np.argsort(snrs, kind="stable")[::-1]
    snrs, rot = snrs[order], rot[:, order]
    basis = whiten @ _orient_columns(rot)
    return basis, snrs


@dataclass(frozen=True)
class MnfModel:
    basis: np.ndarray      # (bands, bands), columns are components
    snrs: np.ndarray       # (bands,), descending
    mean: np.ndarray       # (bands,)
    kept: int
    noise_cov: np.ndarray  # the (regularized) noise covariance the basis whitens

    @property
    def bands(self) -> int:
        return self.basis.shape[0]


def fit_mnf(cube: HyperCube, kept: int, noise_scale: float = NOISE_DIFF_SCALE) -> MnfModel:
    if not 1 <= kept <= cube.bands:
        raise ValueError(f"kept must be in 1..{cube.bands}, got {kept}")
    noise_cov = regularize_noise_covariance(estimate_noise_covariance(cube, noise_scale))
    mean, data_cov = data_covariance(cube.pixels())
    basis, snrs = mnf_basis(data_cov - noise_cov, noise_cov)
    return MnfModel(basis=basis, snrs=snrs, mean=mean, kept=int(kept), noise_cov=noise_cov)


def apply_mnf(model: MnfModel, cube: HyperCube) -> HyperCube:
    """Project each spectrum onto the ``kept`` highest-SNR components."""
    if cube.bands != model.bands:
        raise ValueError(f"cube has {cube.bands} bands, MNF model expects {model.bands}")
    reduced = (cube.pixels() - model.mean) @ model.basis[:, : model.kept]
    return HyperCube.from_pixels(reduced, cube.height, cube.width)


def inverse_mnf(model: MnfModel, reduced: HyperCube) -> HyperCube:
    """Map component scores back to the original bands.

    Uses ``W^{-T} = noise_cov @ W``, which follows from the whitening property;
    with ``kept == bands`` this inverts :func:`apply_mnf`.
    """
    if reduced.bands != model.kept:
        raise ValueError(f"expected {model.kept} components, got {reduced.bands}")
    back = model.noise_cov @ model.basis[:, : model.kept]
    pixels = reduced.pixels() @ back.T + model.mean
    return HyperCube.from_pixels(pixels, reduced.height, reduced.width)
