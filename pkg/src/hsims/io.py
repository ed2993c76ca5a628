"""On-disk formats: raw little-endian cubes with a JSON header, label PNGs, score CSVs.

A cube is stored as two files sharing a stem: ``<stem>.json`` holding exactly the
keys ``height, width, bands, dtype, layout`` and ``<stem>.raw`` holding the
samples band-interleaved-by-pixel. Spectral cubes use ``dtype = "f32"``; ground
truth and label rasters use ``dtype = "u16"`` with ``bands = 1``.
"""
from __future__ import annotations

import colorsys
import csv
import io as _io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from .core import HyperCube

HEADER_KEYS = ("height", "width", "bands", "dtype", "layout")
_DTYPES = {"f32": np.dtype("<f4"), "u16": np.dtype("<u2")}


class CubeFormatError(ValueError):
    """Base class for malformed cube or label files."""


class HeaderError(CubeFormatError):
    pass


class SizeMismatchError(CubeFormatError):
    pass


class NonFiniteError(CubeFormatError):
    pass


@dataclass(frozen=True)
class CubeHeader:
    height: int
    width: int
    bands: int
    dtype: str = "f32"
    layout: str = "bip"

    def __post_init__(self):
        for name in ("height", "width", "bands"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise HeaderError(f"header field {name!r} must be an integer >= 1, got {value!r}")
        if self.dtype not in _DTYPES:
            raise HeaderError(f"unsupported dtype {self.dtype!r}; expected one of {sorted(_DTYPES)}")
        if self.layout != "bip":
            raise HeaderError(f"unsupported layout {self.layout!r}; only 'bip' is supported")

    @property
    def count(self) -> int:
        return self.height * self.width * self.bands

    def to_json(self) -> str:
        return json.dumps({k: getattr(self, k) for k in HEADER_KEYS})

    @classmethod
    def from_dict(cls, doc) -> "CubeHeader":
        if not isinstance(doc, dict):
            raise HeaderError("header must be a JSON object")
        keys = set(doc)
        missing = [k for k in HEADER_KEYS if k not in keys]
        if missing:
            raise HeaderError(f"header missing keys: {', '.join(missing)}")
        extra = sorted(keys - set(HEADER_KEYS))
        if extra:
            raise HeaderError(f"header has unexpected keys: {', '.join(extra)}")
        return cls(**{k: doc[k] for k in HEADER_KEYS})


@dataclass(frozen=True)
class GroundTruth:
    """Integer class map; id 0 marks unlabeled pixels."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2:
            raise ValueError(f"ground truth must be 2-D, got shape {arr.shape}")
        if arr.size and (arr.min() < 0 or arr.max() > np.iinfo(np.uint16).max):
            raise ValueError("ground-truth ids must fit in an unsigned 16-bit integer")
        arr = arr.astype(np.uint16)
        arr.flags.writeable = False
        object.__setattr__(self, "labels", arr)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) if self.labels.size else 0


def data_path_for(header_path) -> Path:
    """Companion ``.raw`` path of a ``.json`` header."""
    return Path(header_path).with_suffix(".raw")


def read_header(header_path) -> CubeHeader:
    try:
        doc = json.loads(Path(header_path).read_text())
    except json.JSONDecodeError as exc:
        raise HeaderError(f"{header_path}: not valid JSON ({exc})") from exc
    return CubeHeader.from_dict(doc)


def _read_raw(header: CubeHeader, data_path) -> np.ndarray:
    dtype = _DTYPES[header.dtype]
    raw = Path(data_path).read_bytes()
    expected = header.count * dtype.itemsize
    if len(raw) != expected:
        raise SizeMismatchError(
            f"{data_path}: expected {expected} bytes for {header.height}x{header.width}x{header.bands} "
            f"{header.dtype}, found {len(raw)}"
        )
    return np.frombuffer(raw, dtype=dtype).reshape(header.height, header.width, header.bands)


def load_cube(header_path, data_path=None) -> HyperCube:
    """Read a ``f32`` cube and promote it to float64."""
    header = read_header(header_path)
    if header.dtype != "f32":
        raise HeaderError(f"{header_path}: spectral cubes must have dtype 'f32', got {header.dtype!r}")
    data = _read_raw(header, data_path if data_path is not None else data_path_for(header_path))
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"{data_path or data_path_for(header_path)}: cube contains NaN or Inf")
    return HyperCube(data.astype(np.float64))


def save_cube(cube: HyperCube, header_path, data_path=None) -> None:
    header = CubeHeader(cube.height, cube.width, cube.bands, "f32", "bip")
    data_path = data_path if data_path is not None else data_path_for(header_path)
    Path(header_path).write_text(header.to_json())
    Path(data_path).write_bytes(np.ascontiguousarray(cube.data, dtype="<f4").tobytes())


def load_labels(header_path, data_path=None) -> np.ndarray:
    """Read a ``u16`` single-band raster as an ``H x W`` array."""
    header = read_header(header_path)
    if header.dtype != "u16" or header.bands != 1:
        raise HeaderError(f"{header_path}: label rasters need dtype 'u16' and bands 1")
    data = _read_raw(header, data_path if data_path is not None else data_path_for(header_path))
    return data[:, :, 0].astype(np.uint16)


def save_labels(labels: np.ndarray, header_path, data_path=None) -> None:
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError(f"label raster must be 2-D, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() > np.iinfo(np.uint16).max):
        raise ValueError("label ids must fit in an unsigned 16-bit integer")
    header = CubeHeader(labels.shape[0], labels.shape[1], 1, "u16", "bip")
    data_path = data_path if data_path is not None else data_path_for(header_path)
    Path(header_path).write_text(header.to_json())
    Path(data_path).write_bytes(np.ascontiguousarray(labels, dtype="<u2").tobytes())


def load_ground_truth(header_path, data_path=None) -> GroundTruth:
    return GroundTruth(load_labels(header_path, data_path))


def save_ground_truth(gt: GroundTruth, header_path, data_path=None) -> None:
    save_labels(gt.labels, header_path, data_path)


# first entry is the unlabeled / background color
_BASE_PALETTE = [
    (0, 0, 0),
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200),
    (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
    (210, 245, 60), (250, 190, 212), (0, 128, 128), (220, 190, 255),
    (170, 110, 40), (255, 250, 200), (128, 0, 0), (170, 255, 195),
    (128, 128, 0), (255, 215, 180), (0, 0, 128), (128, 128, 128),
]


def default_palette(n_classes: int) -> list[tuple[int, int, int]]:
    """Black for id 0 followed by ``n_classes`` distinct colors."""
    palette = list(_BASE_PALETTE[: n_classes + 1])
    golden = 0.618033988749895
    hue = 0.0
    while len(palette) < n_classes + 1:
        hue = (hue + golden) % 1.0
        palette.append(_hsv_to_rgb8(hue, 0.65, 0.95))
    return palette


def _hsv_to_rgb8(h: float, s: float, v: float) -> tuple[int, int, int]:
    r, g, b = colorsys.hsv_to_rgb(h, s, v)
    return int(round(r * 255)), int(round(g * 255)), int(round(b * 255))


def label_png_bytes(labels: np.ndarray, palette: Sequence[Sequence[int]]) -> bytes:
    """Encode an ``H x W`` id map as an 8-bit RGB PNG using ``palette[id]``."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError(f"labels must be 2-D, got shape {labels.shape}")
    lut = np.asarray(palette, dtype=np.int64)
    if lut.ndim != 2 or lut.shape[1] != 3 or np.any(lut < 0) or np.any(lut > 255):
        raise ValueError("palette must be a list of RGB triples in 0..255")
    if labels.size and (labels.min() < 0 or labels.max() >= len(lut)):
        raise ValueError(f"label id {int(labels.max())} outside palette of {len(lut)} colors")
    rgb = lut.astype(np.uint8)[labels.astype(np.int64)]
    buf = _io.BytesIO()
    Image.fromarray(rgb).save(buf, format="PNG", optimize=False, compress_level=9)
    return buf.getvalue()


def save_label_png(labels: np.ndarray, palette: Sequence[Sequence[int]] | None = None, path=None) -> bytes:
    """Render ``labels`` (class 0 black) to PNG; optionally also write it to ``path``."""
    if palette is None:
        palette = default_palette(int(np.max(labels)) if np.size(labels) else 0)
    data = label_png_bytes(labels, palette)
    if path is not None:
        Path(path).write_bytes(data)
    return data


def save_scores_csv(reports: Iterable, path) -> None:
    """Write ``oa,aa,kappa,seed`` rows, one per report, with 6 decimals."""
    if hasattr(reports, "oa"):
        reports = [reports]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["oa", "aa", "kappa", "seed"])
        for r in reports:
            seed = "" if r.seed is None else str(int(r.seed))
            writer.writerow([f"{r.oa:.6f}", f"{r.aa:.6f}", f"{r.kappa:.6f}", seed])
