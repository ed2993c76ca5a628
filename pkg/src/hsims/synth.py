"""Synthetic piecewise-Gaussian cubes with known ground truth."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import HyperCube
from .io import GroundTruth


@dataclass(frozen=True)
class Cluster:
    mean: np.ndarray
    covariance: np.ndarray
    region: tuple[int, int, int, int]   # (row0, col0, row1, col1), half-open

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        cov = np.asarray(self.covariance, dtype=np.float64)
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match mean of length {mean.size}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "region", tuple(int(v) for v in self.region))


@dataclass(frozen=True)
class SynthSpec:
    height: int
    width: int
    clusters: list = field(default_factory=list)
    noise_snr: float | None = None
    seed: int = 0

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthSpec":
        for key in ("height", "width", "clusters"):
            if key not in doc:
                raise KeyError(key)
        clusters = []
        for n, c in enumerate(doc["clusters"]):
            for key in ("mean", "covariance", "region"):
                if key not in c:
                    raise KeyError(f"clusters[{n}].{key}")
            clusters.append(Cluster(c["mean"], c["covariance"], tuple(c["region"])))
        return cls(int(doc["height"]), int(doc["width"]), clusters,
                   doc.get("noise_snr"), int(doc.get("seed", 0)))


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    if not np.allclose(cov, cov.T, atol=1e-12, rtol=0):
        raise ValueError("covariance is not symmetric")
    evals, evecs = np.linalg.eigh(cov)
    scale = max(1.0, float(np.abs(evals).max()))
    if evals.min() < -1e-12 * scale:
        raise ValueError(f"covariance is not positive semidefinite (eigenvalue {evals.min():.3g})")
    return evecs * np.sqrt(np.clip(evals, 0.0, None))


def _region_map(spec: SynthSpec) -> np.ndarray:
    gt = np.zeros((spec.height, spec.width), dtype=np.int64)
    for n, c in enumerate(spec.clusters, start=1):
        r0, c0, r1, c1 = c.region
        if not (0 <= r0 < r1 <= spec.height and 0 <= c0 < c1 <= spec.width):
            raise ValueError(f"cluster {n} region {c.region} outside the {spec.height}x{spec.width} grid")
        if np.any(gt[r0:r1, c0:c1]):
            raise ValueError(f"cluster {n} region overlaps another region")
        gt[r0:r1, c0:c1] = n
    if np.any(gt == 0):
        raise ValueError("cluster regions do not cover the whole grid")
    return gt


def generate(spec: SynthSpec) -> tuple[HyperCube, GroundTruth]:
    """Sample every pixel from the Gaussian of its region.

    Each cluster draws from its own block of a counter-based Philox stream, so
    the output depends only on the seed and the cluster order. Optional white
    noise has variance ``mean band variance / noise_snr``.
    """
    if not spec.clusters:
        raise ValueError("spec has no clusters")
    bands = spec.clusters[0].mean.size
    if any(c.mean.size != bands for c in spec.clusters):
        raise ValueError("all cluster means must have the same length")
    factors = [_psd_factor(c.covariance) for c in spec.clusters]
    gt = _region_map(spec)
    cube = np.empty((spec.height, spec.width, bands))
    for n, (c, factor) in enumerate(zip(spec.clusters, factors)):
        rng = np.random.Generator(np.random.Philox(key=spec.seed).jumped(n))
        r0, c0, r1, c1 = c.region
        z = rng.standard_normal((r1 - r0, c1 - c0, bands))
        cube[r0:r1, c0:c1] = c.mean + z @ factor.T
    if spec.noise_snr is not None:
        if not spec.noise_snr > 0:
            raise ValueError("noise_snr must be > 0")
        power = cube.reshape(-1, bands).var(axis=0).mean()
        rng = np.random.Generator(np.random.Philox(key=spec.seed).jumped(len(spec.clusters)))
        cube = cube + rng.standard_normal(cube.shape) * np.sqrt(power / spec.noise_snr)
    return HyperCube(cube), GroundTruth(gt)


def two_halves_spec(height: int = 32, width: int = 32, seed: int = 0,
                    long_std: float = 0.5, short_std: float = 0.03) -> SynthSpec:
    """Two anisotropic 3-band Gaussians filling the left and right image halves.

    Both clusters are elongated (``long_std``) along different axes and thin
    (``short_std``) elsewhere; the means differ along both long axes and by a
    small offset along the third band. The nearest-mean (Euclidean) rule
    therefore cuts through the long tails of both clusters, while the
    Mahalanobis geometry separates them cleanly along the third band.
    """
    half = width // 2
    mean_a = np.array([0.0, 0.0, 0.0])
    mean_b = np.array([0.5, 0.5, 0.3])
    cov_a = np.diag([long_std**2, short_std**2, short_std**2])
    cov_b = np.diag([short_std**2, long_std**2, short_std**2])
    return SynthSpec(height, width, [
        Cluster(mean_a, cov_a, (0, 0, height, half)),
        Cluster(mean_b, cov_b, (0, half, height, width)),
    ], None, seed)
