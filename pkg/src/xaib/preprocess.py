"""Mammogram cleaning and enhancement.

Stages, in pipeline order: artifact removal (keep the largest foreground
component), border line removal (Gabor bank restricted to a band along the
edges), gamma correction, CLAHE, and bilinear standardization to the target
resolution.  All operations are pure functions.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .core import GrayImage
from .errors import AllBackground, InvalidGamma

__all__ = [
    "PreprocessConfig",
    "remove_artifacts",
    "remove_border_lines",
    "gamma_correct",
    "clahe",
    "resize",
    "resize_array",
    "preprocess_pipeline",
    "preprocess_with_stats",
]


@dataclass(frozen=True)
class PreprocessConfig:
    binarize_threshold: float = 0.1
    opening_radius: int = 5
    gamma: float = 0.8
    clahe_clip_limit: float = 2.0
    clahe_tile_grid: tuple[int, int] = (8, 8)
    gabor_orientations: tuple[float, ...] = (0.0, 45.0, 90.0, 135.0)
    gabor_wavelength: float = 4.0
    border_band: int = 20
    target_size: tuple[int, int] = (224, 224)

    def __post_init__(self):
        if not (0.0 <= self.binarize_threshold <= 1.0):
            raise ValueError("binarize_threshold must lie in [0, 1]")
        if self.gamma <= 0:
            raise InvalidGamma(f"gamma must be positive, got {self.gamma}")
        if self.clahe_clip_limit < 1.0:
            raise ValueError("clahe_clip_limit must be >= 1")
        if self.opening_radius < 0:
            raise ValueError("opening_radius must be >= 0")
        if self.border_band < 1:
            raise ValueError("border_band must be >= 1")
        if min(self.target_size) < 1:
            raise ValueError("target_size must be >= (1, 1)")


def _disk(radius: int) -> np.ndarray:
    if radius == 0:
        return np.ones((1, 1), dtype=bool)
    y, x = np.ogrid[-radius : radius + 1, -radius : radius + 1]
    return x * x + y * y <= radius * radius


def remove_artifacts(image: GrayImage, cfg: PreprocessConfig) -> GrayImage:
    """Zero every pixel outside the largest connected foreground component.

    Foreground = intensity > binarize_threshold, cleaned by morphological
    opening; ties between equally large components break toward the lowest
    component label, so the result is deterministic.
    """
    fg = image.data > cfg.binarize_threshold
    if not fg.any():
        raise AllBackground("no pixel exceeds the binarization threshold")
    opened = ndimage.binary_opening(fg, structure=_disk(cfg.opening_radius))
    labels, n = ndimage.label(opened)
    if n == 0:
        raise AllBackground("morphological opening removed all foreground")
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    core = labels == int(np.argmax(sizes))
    # grow back to the full thresholded component so the opening does not
    # nibble the breast boundary
    keep = ndimage.binary_propagation(core, mask=fg)
    return GrayImage(np.where(keep, image.data, 0.0))


def _gabor_kernel(wavelength: float, theta_deg: float) -> np.ndarray:
    """Real (even) Gabor kernel tuned to ridges of width ~ wavelength/2."""
    sigma = 0.56 * wavelength
    gamma_aspect = 0.5
    half = max(2, int(np.ceil(2.5 * sigma)))
    y, x = np.mgrid[-half : half + 1, -half : half + 1].astype(np.float64)
    theta = np.deg2rad(theta_deg)
    xr = x * np.cos(theta) + y * np.sin(theta)
    yr = -x * np.sin(theta) + y * np.cos(theta)
    k = np.exp(-(xr**2 + (gamma_aspect * yr) ** 2) / (2 * sigma**2)) * np.cos(
        2 * np.pi * xr / wavelength
    )
    k -= k.mean()  # zero DC: flat regions give no response
    k /= np.abs(k).sum()  # unit L1: responses bounded by 1 for [0,1] input
    return k


def _border_band_mask(shape: tuple[int, int], band: int) -> np.ndarray:
    h, w = shape
    m = np.zeros((h, w), dtype=bool)
    b = min(band, h, w)
    m[:b, :] = True
    m[-b:, :] = True
    m[:, :b] = True
    m[:, -b:] = True
    return m


def remove_border_lines(image: GrayImage, cfg: PreprocessConfig) -> GrayImage:
    """Erase thin, bright, line-like structures near the image edges.

    Pixels farther than border_band from every edge are never modified.
    A pixel is erased when it is bright, lies in the border band, is not
    part of a thick structure (survives a small opening), and the Gabor
    bank responds strongly at it.  No-op when nothing qualifies.
    """
    band = _border_band_mask(image.shape, cfg.border_band)
    bright = image.data > cfg.binarize_threshold
    candidates = bright & band
    if not candidates.any():
        return GrayImage(image.data.copy())
    resp = np.zeros_like(image.data)
    for theta in cfg.gabor_orientations:
        k = _gabor_kernel(cfg.gabor_wavelength, theta)
        r = ndimage.convolve(image.data, k, mode="constant", cval=0.0)
        np.maximum(resp, np.abs(r), out=resp)
    thick = ndimage.binary_opening(bright, structure=_disk(3))
    lines = candidates & ~thick & (resp > 0.05)
    return GrayImage(np.where(lines, 0.0, image.data))


def gamma_correct(image: GrayImage, gamma: float) -> GrayImage:
    if gamma <= 0:
        raise InvalidGamma(f"gamma must be positive, got {gamma}")
    return GrayImage(np.power(image.data, gamma))


def clahe(image: GrayImage, cfg: PreprocessConfig) -> GrayImage:
    """Contrast-limited adaptive histogram equalization on [0, 1] floats.

    Per-tile 256-bin histograms are clipped at clip_limit x the uniform
    level, the excess is redistributed evenly, and per-pixel mappings are
    bilinearly interpolated between the four surrounding tile mappings.
    """
    nbins = 256
    rows, cols = cfg.clahe_tile_grid
    h, w = image.shape
    # pad with edge values so every tile has the same size
    th = -(-h // rows)
    tw = -(-w // cols)
    padded = np.pad(image.data, ((0, th * rows - h), (0, tw * cols - w)), mode="edge")
    bins_p = np.minimum((padded * nbins).astype(np.int64), nbins - 1)

    npix = th * tw
    luts = np.empty((rows, cols, nbins), dtype=np.float64)
    clip = max(1.0, cfg.clahe_clip_limit * npix / nbins)
    for r in range(rows):
        for c in range(cols):
            tile = bins_p[r * th : (r + 1) * th, c * tw : (c + 1) * tw]
            hist = np.bincount(tile.ravel(), minlength=nbins).astype(np.float64)
            excess = np.maximum(hist - clip, 0.0).sum()
            hist = np.minimum(hist, clip) + excess / nbins
            cdf = np.cumsum(hist)
            luts[r, c] = cdf / cdf[-1]

    # bilinear interpolation between tile-center mappings
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    ty = yy / th - 0.5  # fractional tile coordinate
    tx = xx / tw - 0.5
    r0 = np.clip(np.floor(ty).astype(np.int64), 0, rows - 1)
    c0 = np.clip(np.floor(tx).astype(np.int64), 0, cols - 1)
    r1 = np.minimum(r0 + 1, rows - 1)
    c1 = np.minimum(c0 + 1, cols - 1)
    fy = np.clip(ty - r0, 0.0, 1.0)
    fx = np.clip(tx - c0, 0.0, 1.0)

    bins = bins_p[:h, :w]
    v00 = luts[r0, c0, bins]
    v01 = luts[r0, c1, bins]
    v10 = luts[r1, c0, bins]
    v11 = luts[r1, c1, bins]
    out = (
        v00 * (1 - fy) * (1 - fx)
        + v01 * (1 - fy) * fx
        + v10 * fy * (1 - fx)
        + v11 * fy * fx
    )
    return GrayImage(np.clip(out, 0.0, 1.0))


def resize_array(data: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Bilinear resampling of a 2-D float array (center-aligned samples)."""
    h, w = data.shape
    th, tw = target
    if (th, tw) == (h, w):
        return data.copy()
    ys = np.clip((np.arange(th) + 0.5) * h / th - 0.5, 0, h - 1)
    xs = np.clip((np.arange(tw) + 0.5) * w / tw - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    g = data
    out = (
        g[np.ix_(y0, x0)] * (1 - fy) * (1 - fx)
        + g[np.ix_(y0, x1)] * (1 - fy) * fx
        + g[np.ix_(y1, x0)] * fy * (1 - fx)
        + g[np.ix_(y1, x1)] * fy * fx
    )
    return out


def resize(image: GrayImage, target: tuple[int, int]) -> GrayImage:
    if min(target) < 1:
        raise ValueError("target size must be >= (1, 1)")
    return GrayImage(np.clip(resize_array(image.data, target), 0.0, 1.0))


def preprocess_with_stats(
    image: GrayImage, cfg: PreprocessConfig
) -> tuple[GrayImage, dict]:
    """Full pipeline plus a per-stage count of modified pixels."""
    stats = {}
    stages = [
        ("remove_artifacts", lambda im: remove_artifacts(im, cfg)),
        ("remove_border_lines", lambda im: remove_border_lines(im, cfg)),
        ("gamma_correct", lambda im: gamma_correct(im, cfg.gamma)),
        ("clahe", lambda im: clahe(im, cfg)),
    ]
    current = image
    for name, fn in stages:
        nxt = fn(current)
        stats[name] = int(np.count_nonzero(nxt.data != current.data))
        current = nxt
    resized = resize(current, cfg.target_size)
    stats["resize"] = {"from": list(current.shape), "to": list(cfg.target_size)}
    return resized, stats


def preprocess_pipeline(image: GrayImage, cfg: PreprocessConfig) -> GrayImage:
    out, _ = preprocess_with_stats(image, cfg)
    return out
