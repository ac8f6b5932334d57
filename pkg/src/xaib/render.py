"""Figure-style outputs: heatmap overlays and per-segment value rendering."""
from __future__ import annotations

import numpy as np

from .core import GrayImage, Heatmap, Segmentation
from .explain import Attribution

__all__ = ["attribution_to_heatmap", "overlay_rgb"]


def attribution_to_heatmap(attr: Attribution, segmentation: Segmentation) -> Heatmap:
    """Paint the positive part of the segment weights onto pixels, min-max
    normalized; all-nonpositive attributions give an all-zero map."""
    per_pixel = np.maximum(attr.values, 0.0)[segmentation.labels]
    peak = per_pixel.max()
    if peak == 0.0:
        return Heatmap(np.zeros(segmentation.shape))
    return Heatmap(per_pixel / peak)


def overlay_rgb(image: GrayImage, heatmap: Heatmap, alpha: float = 0.4) -> np.ndarray:
    """Alpha-blend the heatmap through a fixed blue->red colormap; returns
    (H, W, 3) floats in [0, 1]."""
    if heatmap.shape != image.shape:
        raise ValueError("overlay requires equal image and heatmap dimensions")
    v = heatmap.data
    color = np.stack([v, np.zeros_like(v), 1.0 - v], axis=-1)
    gray = np.repeat(image.data[:, :, None], 3, axis=2)
    return (1.0 - alpha) * gray + alpha * color
