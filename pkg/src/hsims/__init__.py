"""Unsupervised hyperspectral segmentation with a robust anisotropic Mumford-Shah model."""
from .core import HyperCube, LabelField, make_rng, pixel_spectrum
from .evaluate import EvalReport, confusion_matrix, evaluate, hungarian_match, scores
from .fitting import FixedPointConfig, fit_segment
from .indicator import SegmentModel, indicator_field, indicator_value, regularize_covariance
from .kmeans import kmeans, labels_to_field
from .pdhg import PdhgConfig, project_simplex, solve_labeling
from .pipeline import IndicatorMode, PipelineConfig, segment, threshold
from .preprocess import MnfModel, apply_mnf, estimate_noise_covariance, fit_mnf, normalize_cube
from .synth import SynthSpec, generate

__version__ = "0.1.0"

__all__ = [
    "HyperCube", "LabelField", "make_rng", "pixel_spectrum",
    "EvalReport", "confusion_matrix", "evaluate", "hungarian_match", "scores",
    "FixedPointConfig", "fit_segment",
    "SegmentModel", "indicator_field", "indicator_value", "regularize_covariance",
    "kmeans", "labels_to_field",
    "PdhgConfig", "project_simplex", "solve_labeling",
    "IndicatorMode", "PipelineConfig", "segment", "threshold",
    "MnfModel", "apply_mnf", "estimate_noise_covariance", "fit_mnf", "normalize_cube",
    "SynthSpec", "generate",
]
