"""Stratified splitting and the seven fixed training-set augmentations.

The seven variants (vertical flip, horizontal flip, both, and +/-30 degree
rotations with and without a horizontal flip) are deterministic; combined
kinds rotate first, then flip.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import BinaryMask, GrayImage, LabeledSample, Label, Rng, derive_seed
from .errors import NonSquare, TooFewSamples

__all__ = [
    "AugmentKind",
    "SplitResult",
    "stratified_split",
    "augment_variant",
    "augment_mask",
    "augment_training_set",
]


class AugmentKind(Enum):
    # order matches the seven fixed variants A..G
    FLIP_V = "flip_v"
    FLIP_H = "flip_h"
    FLIP_HV = "flip_hv"
    ROT_M30_FLIP_H = "rot_m30_flip_h"
    ROT_M30 = "rot_m30"
    ROT_P30 = "rot_p30"
    ROT_P30_FLIP_H = "rot_p30_flip_h"


_ROTATING = {
    AugmentKind.ROT_M30_FLIP_H,
    AugmentKind.ROT_M30,
    AugmentKind.ROT_P30,
    AugmentKind.ROT_P30_FLIP_H,
}


@dataclass(frozen=True)
class SplitResult:
    train: list
    test: list
    seed: int


def stratified_split(samples: list, ratio: float, seed: int) -> SplitResult:
    """Per-class shuffle, first ceil(ratio * n_class) samples go to train."""
    if not (0.0 < ratio < 1.0):
        raise ValueError("ratio must lie strictly between 0 and 1")
    by_class: dict[Label, list] = {}
    for s in samples:
        by_class.setdefault(s.label, []).append(s)
    for label, group in by_class.items():
        if len(group) < 2:
            raise TooFewSamples(f"class {label.value} has {len(group)} sample(s), need >= 2")
    train: list = []
    test: list = []
    for label in sorted(by_class, key=lambda l: l.value):
        group = sorted(by_class[label], key=lambda s: s.id)
        rng = Rng(derive_seed(seed, label.value, 0))
        order = rng.permutation(len(group))
        n_train = math.ceil(ratio * len(group))
        train.extend(group[i] for i in order[:n_train])
        test.extend(group[i] for i in order[n_train:])
    train.sort(key=lambda s: s.id)
    test.sort(key=lambda s: s.id)
    return SplitResult(train=train, test=test, seed=seed)


def _rotate_array(data: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate about the center by inverse mapping with bilinear sampling;
    samples falling outside the source are filled with 0."""
    h, w = data.shape
    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    theta = np.deg2rad(degrees)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    dy = yy - cy
    dx = xx - cx
    # inverse rotation of the output grid back into source coordinates
    sy = cy + dy * cos_t + dx * sin_t
    sx = cx - dy * sin_t + dx * cos_t
    inside = (sy >= 0) & (sy <= h - 1) & (sx >= 0) & (sx <= w - 1)
    sy = np.clip(sy, 0, h - 1)
    sx = np.clip(sx, 0, w - 1)
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = sy - y0
    fx = sx - x0
    out = (
        data[y0, x0] * (1 - fy) * (1 - fx)
        + data[y0, x1] * (1 - fy) * fx
        + data[y1, x0] * fy * (1 - fx)
        + data[y1, x1] * fy * fx
    )
    out[~inside] = 0.0
    return out


def _apply_kind(data: np.ndarray, kind: AugmentKind) -> np.ndarray:
    if kind in _ROTATING and data.shape[0] != data.shape[1]:
        raise NonSquare(f"rotation requires a square image, got {data.shape}")
    if kind is AugmentKind.FLIP_V:
        return data[::-1, :].copy()
    if kind is AugmentKind.FLIP_H:
        return data[:, ::-1].copy()
    if kind is AugmentKind.FLIP_HV:
        return data[::-1, ::-1].copy()
    if kind is AugmentKind.ROT_M30:
        return _rotate_array(data, -30.0)
    if kind is AugmentKind.ROT_P30:
        return _rotate_array(data, 30.0)
    if kind is AugmentKind.ROT_M30_FLIP_H:
        return _rotate_array(data, -30.0)[:, ::-1].copy()
    if kind is AugmentKind.ROT_P30_FLIP_H:
        return _rotate_array(data, 30.0)[:, ::-1].copy()
    raise ValueError(f"unknown augmentation kind {kind}")


def augment_variant(image: GrayImage, kind: AugmentKind) -> GrayImage:
    return GrayImage(np.clip(_apply_kind(image.data, kind), 0.0, 1.0))


def augment_mask(mask: BinaryMask, kind: AugmentKind) -> BinaryMask:
    out = _apply_kind(mask.data.astype(np.float64), kind)
    return BinaryMask(out >= 0.5)


def augment_training_set(train: list) -> list:
    """Original samples plus all seven variants each; ROIs co-transform."""
    out: list = []
    for sample in train:
        out.append(sample)
        for kind in AugmentKind:
            roi = augment_mask(sample.roi, kind) if sample.roi is not None else None
            out.append(
                LabeledSample(
                    id=f"{sample.id}__{kind.value}",
                    image=augment_variant(sample.image, kind),
                    label=sample.label,
                    roi=roi,
                )
            )
    return out
