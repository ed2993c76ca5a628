"""Shared array containers and seeded randomness.

All spatial arrays use row-major ``(row, column, channel)`` layout, so a cube
of shape ``(H, W, L)`` stores the spectrum of pixel ``(i, j)`` in
``data[i, j, :]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class HyperCube:
    """An ``H x W x bands`` image of 64-bit spectral intensities."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"HyperCube data must be 3-D (H, W, bands), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"HyperCube dimensions must be >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("HyperCube data contains non-finite values")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def bands(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def pixels(self) -> np.ndarray:
        """Return the spectra as an ``(H*W, bands)`` matrix (a view)."""
        return self.data.reshape(-1, self.bands)

    @classmethod
    def from_pixels(cls, pixels: np.ndarray, height: int, width: int) -> "HyperCube":
        pixels = np.asarray(pixels, dtype=np.float64)
        return cls(pixels.reshape(height, width, -1))


@dataclass(frozen=True)
class LabelField:
    """Relaxed labeling: an ``H x W x k`` array whose pixel rows lie on the unit simplex."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"LabelField data must be 3-D (H, W, k), got shape {arr.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def classes(self) -> int:
        return self.data.shape[2]

    def on_simplex(self, tol: float = SIMPLEX_TOL) -> bool:
        return is_on_simplex(self.data, tol)

    def is_one_hot(self) -> bool:
        d = self.data
        return bool(np.all((d == 0) | (d == 1)) and np.all(d.sum(axis=-1) == 1))

    def hard_labels(self) -> np.ndarray:
        """1-based class ids (``H x W``), ties resolved to the smallest index."""
        return np.argmax(self.data, axis=-1) + 1


def is_on_simplex(u: np.ndarray, tol: float = SIMPLEX_TOL) -> bool:
    """True if every row along the last axis is nonnegative and sums to 1 within ``tol``."""
    u = np.asarray(u)
    return bool(np.all(u >= -tol) and np.all(np.abs(u.sum(axis=-1) - 1.0) <= tol))


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator; the only source of randomness in the package."""
    return np.random.Generator(np.random.PCG64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))


def pixel_spectrum(cube: HyperCube, i: int, j: int) -> np.ndarray:
    if not (0 <= i < cube.height and 0 <= j < cube.width):
        raise IndexError(f"pixel ({i}, {j}) outside {cube.height}x{cube.width} grid")
    return cube.data[i, j]
