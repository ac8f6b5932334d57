"""Explanation-safety benchmark for mammography-style image classifiers:
preprocessing, augmentation, a desk-scale CNN, three post-hoc explainers,
and quantitative explanation scoring."""

from .core import (
    BinaryMask,
    GrayImage,
    Heatmap,
    Label,
    LabeledSample,
    Rng,
    Segmentation,
    derive_seed,
)

__version__ = "0.1.0"
