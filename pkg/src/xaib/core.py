"""Core raster types, dataset records, and deterministic randomness.

All images are stored as 2-D float64 arrays with intensities in [0, 1];
8-bit PNGs are divided by 255 on ingestion.  Types are immutable after
construction and safe to share across threads.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, ShapeMismatch, XaibError

__all__ = [
    "GrayImage",
    "BinaryMask",
    "Heatmap",
    "Segmentation",
    "Label",
    "LabeledSample",
    "Rng",
    "derive_seed",
]


def _as_2d(data, dtype) -> np.ndarray:
    arr = np.asarray(data, dtype=dtype)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeMismatch(f"expected nonempty 2-D raster, got shape {arr.shape}")
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Single-channel raster with intensities in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = _as_2d(self.data, np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("GrayImage contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("GrayImage intensities must lie in [0, 1]")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Boolean raster; used for explanation masks and expert ROIs."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _as_2d(self.data, bool))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def count(self) -> int:
        return int(self.data.sum())


@dataclass(frozen=True, eq=False)
class Heatmap:
    """Relevance map with values in [0, 1].

    Producers min-max normalize, so a non-zero heatmap peaks at 1; the
    constructor only enforces the [0, 1] range so that externally supplied
    maps (e.g. a constant 0.7) remain representable.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = _as_2d(self.data, np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("Heatmap contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("Heatmap values must lie in [0, 1]")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True, eq=False)
class Segmentation:
    """Superpixel labelling: every pixel carries a segment index.

    Each index in [0, num_segments) occurs at least once and every segment
    is 4-connected.
    """

    labels: np.ndarray
    num_segments: int

    def __post_init__(self):
        labels = _as_2d(self.labels, np.int64)
        object.__setattr__(self, "labels", labels)
        n = int(self.num_segments)
        object.__setattr__(self, "num_segments", n)
        if n < 1:
            raise ValueError("num_segments must be >= 1")
        if labels.min() < 0 or labels.max() >= n:
            raise ValueError("segment labels out of range")
        counts = np.bincount(labels.ravel(), minlength=n)
        if np.any(counts == 0):
            raise ValueError("every segment index must occur at least once")
        for s in range(n):
            _, ncomp = ndimage.label(labels == s, structure=_FOUR_CONN)
            if ncomp != 1:
                raise ValueError(f"segment {s} is not 4-connected")

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape


class Label(Enum):
    BENIGN = "benign"
    MALIGNANT = "malignant"

    @classmethod
    def parse(cls, text: str) -> "Label":
        from .errors import BadLabel

        key = text.strip().lower()
        for member in cls:
            if member.value == key:
                return member
        raise BadLabel(f"unknown label {text!r} (expected benign/malignant)")


@dataclass(frozen=True, eq=False)
class LabeledSample:
    id: str
    image: GrayImage
    label: Label
    roi: Optional[BinaryMask] = None

    def __post_init__(self):
        if self.roi is not None and self.roi.shape != self.image.shape:
            raise DimensionMismatch(
                f"sample {self.id!r}: ROI shape {self.roi.shape} != image shape {self.image.shape}"
            )


class Rng:
    """Seeded, platform-independent random stream (counter-based Philox).

    Single-owner: never share one instance across threads.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.Philox(key=np.uint64(self.seed)))

    def random(self, size=None):
        return self._gen.random(size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size=size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def shuffle(self, seq) -> None:
        self._gen.shuffle(seq)

    def bernoulli(self, p: float, size) -> np.ndarray:
        return self._gen.random(size) < p


def derive_seed(master_seed: int, sample_id: str, run_index: int) -> int:
    """Hash (master_seed, sample_id, run_index) into a 64-bit sub-seed.

    Pure; distinct inputs collide only with hash probability.
    """
    msg = f"{int(master_seed)}\x1f{sample_id}\x1f{int(run_index)}".encode("utf-8")
    return int.from_bytes(hashlib.blake2b(msg, digest_size=8).digest(), "little")
