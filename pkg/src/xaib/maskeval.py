"""Explanation-quality scoring: binarization of explanations, ROI
compositing, directed Hausdorff distance, dataset-level reports, and
stability/consistency metrics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import ndimage

from .core import BinaryMask, GrayImage, Heatmap, Segmentation
from .errors import EmptyList, EmptyMask, NoRois, RuleMismatch, ShapeMismatch
from .explain import Attribution

__all__ = [
    "heatmap_to_mask",
    "attribution_to_mask",
    "merge_rois",
    "directed_hausdorff",
    "symmetric_hausdorff",
    "mask_iou",
    "HausdorffReport",
    "hausdorff_report",
    "StabilityReport",
    "stability_eval",
    "PairConsistency",
    "consistency_eval",
]


def heatmap_to_mask(
    h: Heatmap, strategy: str = "fraction_of_max", tau: float = 0.5
) -> BinaryMask:
    """fraction_of_max: true iff value >= tau * max; otsu: 256-bin threshold
    maximizing inter-class variance.  An all-zero heatmap gives an all-false
    mask under either strategy."""
    if strategy not in ("fraction_of_max", "otsu"):
        raise ValueError(f"unknown strategy {strategy!r}")
    data = h.data
    peak = data.max()
    if peak == 0.0:
        return BinaryMask(np.zeros(h.shape, dtype=bool))
    if strategy == "fraction_of_max":
        if not (0.0 < tau <= 1.0):
            raise ValueError("tau must lie in (0, 1]")
        return BinaryMask(data >= tau * peak)
    if strategy == "otsu":
        hist, edges = np.histogram(data, bins=256, range=(0.0, 1.0))
        p = hist.astype(np.float64) / hist.sum()
        omega = np.cumsum(p)
        mu = np.cumsum(p * (edges[:-1] + edges[1:]) / 2.0)
        mu_t = mu[-1]
        denom = omega * (1.0 - omega)
        with np.errstate(divide="ignore", invalid="ignore"):
            sigma_b = np.where(denom > 0, (mu_t * omega - mu) ** 2 / denom, 0.0)
        threshold = edges[int(np.argmax(sigma_b)) + 1]
        return BinaryMask(data >= threshold)
    raise ValueError(f"unknown strategy {strategy!r}")


def attribution_to_mask(
    attr: Attribution,
    segmentation: Segmentation,
    rule: str = "selected",
    k: int | None = None,
) -> BinaryMask:
    """Marks the pixels of the qualifying segments.

    rules: "selected" (the surrogate's chosen set; only meaningful for
    LIME), "positive" (weights > 0), "top_k" (k largest weights).
    """
    d = segmentation.num_segments
    if attr.values.shape != (d,):
        raise ShapeMismatch(
            f"attribution length {attr.values.shape} != num_segments {d}"
        )
    if rule == "selected":
        if attr.selected is None:
            raise RuleMismatch(
                f"'selected' rule requires a selection set; {attr.method} has none"
            )
        chosen = np.zeros(d, dtype=bool)
        chosen[list(attr.selected)] = True
    elif rule == "positive":
        chosen = attr.values > 0.0
    elif rule == "top_k":
        if k is None or k < 1:
            raise ValueError("top_k rule requires k >= 1")
        order = np.argsort(-attr.values, kind="stable")
        chosen = np.zeros(d, dtype=bool)
        chosen[order[: min(k, d)]] = True
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return BinaryMask(chosen[segmentation.labels])


def merge_rois(masks: Sequence[BinaryMask]) -> BinaryMask:
    """Pixelwise union of equally sized masks."""
    if len(masks) == 0:
        raise EmptyList("merge_rois requires at least one mask")
    shape = masks[0].shape
    out = np.zeros(shape, dtype=bool)
    for m in masks:
        if m.shape != shape:
            raise ShapeMismatch(f"mask shape {m.shape} != {shape}")
        out |= m.data
    return BinaryMask(out)


def directed_hausdorff(a: BinaryMask, b: BinaryMask) -> float:
    """max over true pixels of A of the Euclidean distance to the nearest
    true pixel of B; exact, via the Euclidean distance transform of B."""
    if not a.data.any():
        raise EmptyMask("first operand (A) has no true pixel")
    if not b.data.any():
        raise EmptyMask("second operand (B) has no true pixel")
    if a.shape != b.shape:
        raise ShapeMismatch(f"mask shapes differ: {a.shape} vs {b.shape}")
    dt = ndimage.distance_transform_edt(~b.data)
    return float(dt[a.data].max())


def symmetric_hausdorff(a: BinaryMask, b: BinaryMask) -> float:
    return max(directed_hausdorff(a, b), directed_hausdorff(b, a))


def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
    union = np.logical_or(a.data, b.data).sum()
    if union == 0:
        return 1.0  # two empty masks are identical
    return float(np.logical_and(a.data, b.data).sum() / union)


@dataclass(frozen=True)
class SampleDistance:
    id: str
    forward: Optional[float]  # H(explanation mask, roi)
    reverse: Optional[float]  # H(roi, explanation mask)
    symmetric: Optional[float]
    skipped: bool = False
    reason: str = ""


@dataclass(frozen=True)
class HausdorffReport:
    method: str
    per_sample: tuple[SampleDistance, ...]
    mean: Optional[float]
    min: Optional[float]
    max: Optional[float]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "mean": self.mean,
            "min": self.min,
            "max": self.max,
            "per_sample": [
                {
                    "id": s.id,
                    "forward": s.forward,
                    "reverse": s.reverse,
                    "symmetric": s.symmetric,
                    "skipped": s.skipped,
                    "reason": s.reason,
                }
                for s in self.per_sample
            ],
        }


def hausdorff_report(
    entries: Sequence[tuple[str, BinaryMask, Optional[BinaryMask]]],
    method: str,
) -> HausdorffReport:
    """Per-sample directed distance explanation->ROI (plus the reverse and
    symmetric values) and the dataset mean/min/max over the forward
    distances.  Samples whose explanation mask is empty are recorded as
    skipped and excluded from the aggregates."""
    if not any(roi is not None for _, _, roi in entries):
        raise NoRois("no sample carries a ground-truth ROI")
    per = []
    scored = []
    for sample_id, mask, roi in entries:
        if roi is None or not roi.data.any():
            per.append(
                SampleDistance(sample_id, None, None, None, True, "missing or empty ROI")
            )
            continue
        if not mask.data.any():
            per.append(
                SampleDistance(sample_id, None, None, None, True, "empty explanation mask")
            )
            continue
        fwd = directed_hausdorff(mask, roi)
        rev = directed_hausdorff(roi, mask)
        per.append(SampleDistance(sample_id, fwd, rev, max(fwd, rev)))
        scored.append(fwd)
    if scored:
        mean, lo, hi = float(np.mean(scored)), float(np.min(scored)), float(np.max(scored))
    else:
        mean = lo = hi = None
    return HausdorffReport(
        method=method, per_sample=tuple(per), mean=mean, min=lo, max=hi
    )


@dataclass(frozen=True)
class StabilityReport:
    runs: int
    seeds: tuple[int, ...]
    pairwise_iou: np.ndarray
    pairwise_hausdorff: np.ndarray
    deterministic: bool

    def mean_pairwise_iou(self) -> float:
        n = self.runs
        off = ~np.eye(n, dtype=bool)
        return float(self.pairwise_iou[off].mean())

    def to_dict(self) -> dict:
        return {
            "runs": self.runs,
            "seeds": list(self.seeds),
            "pairwise_iou": self.pairwise_iou.tolist(),
            "pairwise_hausdorff": self.pairwise_hausdorff.tolist(),
            "deterministic": self.deterministic,
            "mean_pairwise_iou": self.mean_pairwise_iou(),
        }


def _to_mask(result, strategy: str, tau: float) -> BinaryMask:
    if isinstance(result, BinaryMask):
        return result
    if isinstance(result, Heatmap):
        return heatmap_to_mask(result, strategy=strategy, tau=tau)
    raise TypeError(f"explainer returned {type(result)!r}, expected Heatmap or BinaryMask")


def stability_eval(
    explainer: Callable[[int], object],
    runs: int,
    seeds: Sequence[int],
    strategy: str = "fraction_of_max",
    tau: float = 0.5,
) -> StabilityReport:
    """Re-runs `explainer(seed)` per seed on a fixed input, binarizes, and
    fills the pairwise IoU / symmetric-Hausdorff matrices.  deterministic is
    true iff all masks are identical."""
    if runs < 2:
        raise ValueError("stability evaluation requires runs >= 2")
    if len(seeds) != runs:
        raise ValueError("need exactly one seed per run")
    masks = [_to_mask(explainer(int(s)), strategy, tau) for s in seeds]
    iou = np.eye(runs)
    hd = np.zeros((runs, runs))
    for i in range(runs):
        for j in range(i + 1, runs):
            iou[i, j] = iou[j, i] = mask_iou(masks[i], masks[j])
            if masks[i].data.any() and masks[j].data.any():
                hd[i, j] = hd[j, i] = symmetric_hausdorff(masks[i], masks[j])
            else:
                hd[i, j] = hd[j, i] = np.nan
    deterministic = all(np.array_equal(masks[0].data, m.data) for m in masks[1:])
    return StabilityReport(
        runs=runs,
        seeds=tuple(int(s) for s in seeds),
        pairwise_iou=iou,
        pairwise_hausdorff=hd,
        deterministic=deterministic,
    )


@dataclass(frozen=True)
class PairConsistency:
    first_id: str
    second_id: str
    iou: float
    hausdorff: Optional[float]


def consistency_eval(
    pairs: Sequence[tuple],
    explainer: Callable[[object], object],
    strategy: str = "fraction_of_max",
    tau: float = 0.5,
) -> list[PairConsistency]:
    """Explanation-mask similarity for pairs of similar samples; metric
    only, no pass/fail threshold."""
    out = []
    for a, b in pairs:
        if a.image.shape != b.image.shape:
            raise ShapeMismatch(f"pair {a.id}/{b.id}: image dimensions differ")
        ma = _to_mask(explainer(a), strategy, tau)
        mb = _to_mask(explainer(b), strategy, tau)
        hd = (
            symmetric_hausdorff(ma, mb)
            if ma.data.any() and mb.data.any()
            else None
        )
        out.append(PairConsistency(a.id, b.id, mask_iou(ma, mb), hd))
    return out
