"""The three explainers: gradient-weighted class activation maps,
sparse local surrogates over superpixels, and Shapley attribution
(exact enumeration and permutation sampling)."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import ndimage

from .core import GrayImage, Heatmap, Rng, Segmentation
from .errors import (
    DegenerateSamples,
    LengthMismatch,
    TooManySegments,
)
from .lasso import lasso_path_support, weighted_least_squares
from .preprocess import resize_array

__all__ = [
    "InterpretableInstance",
    "Attribution",
    "LimeConfig",
    "grad_cam",
    "segment",
    "perturb",
    "lime_explain",
    "shap_exact",
    "shap_sampled",
]


EXACT_SHAP_MAX_SEGMENTS = 12


@dataclass(frozen=True, eq=False)
class InterpretableInstance:
    """An image viewed as a binary vector over superpixels; absent segments
    render at fill_value, the all-ones vector reconstructs the original."""

    image: GrayImage
    segmentation: Segmentation
    active: np.ndarray
    fill_value: float

    def __post_init__(self):
        if self.segmentation.shape != self.image.shape:
            raise LengthMismatch("segmentation and image dimensions differ")
        act = np.asarray(self.active, dtype=bool)
        if act.shape != (self.segmentation.num_segments,):
            raise LengthMismatch(
                f"active vector length {act.shape} != num_segments "
                f"{self.segmentation.num_segments}"
            )
        object.__setattr__(self, "active", act)
        if not (0.0 <= self.fill_value <= 1.0):
            raise ValueError("fill_value must lie in [0, 1]")

    @classmethod
    def from_image(
        cls, image: GrayImage, segmentation: Segmentation, fill_value: float | None = None
    ) -> "InterpretableInstance":
        if fill_value is None:
            fill_value = float(image.data.mean())
        return cls(
            image=image,
            segmentation=segmentation,
            active=np.ones(segmentation.num_segments, dtype=bool),
            fill_value=fill_value,
        )


@dataclass(frozen=True, eq=False)
class Attribution:
    """Per-segment importance weights plus the base value."""

    base_value: float
    values: np.ndarray
    target_class: int
    method: str  # "lime" | "shap_exact" | "shap_sampled"
    selected: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(vals)) or not math.isfinite(self.base_value):
            raise ValueError("attribution values must be finite")
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class LimeConfig:
    num_samples: int = 200
    k: int = 5
    kernel_width: float = 0.25
    seed: int = 0
    lasso_lambda_grid: tuple[float, ...] = tuple(
        np.power(10.0, -np.linspace(0.0, 2.0, 50))
    )

    def __post_init__(self):
        if self.kernel_width <= 0:
            raise ValueError("kernel_width must be positive")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.num_samples < 2:
            raise ValueError("num_samples must be >= 2")


# ---------------------------------------------------------------------------
# Grad-CAM

def grad_cam(bundle, output_size: tuple[int, int]) -> Heatmap:
    """Channel weights are the spatial mean of the gradients; the weighted
    activation sum is rectified, upsampled, then min-max normalized (an
    all-zero map stays all-zero)."""
    alpha = bundle.gradients.mean(axis=(1, 2))  # (K,)
    cam = np.maximum(np.tensordot(alpha, bundle.activations, axes=(0, 0)), 0.0)
    cam = np.maximum(resize_array(cam, output_size), 0.0)
    lo, hi = cam.min(), cam.max()
    if hi == 0.0:
        return Heatmap(np.zeros(output_size))
    if hi == lo:
        return Heatmap(np.ones(output_size))
    return Heatmap((cam - lo) / (hi - lo))


# ---------------------------------------------------------------------------
# superpixel segmentation (SLIC-style k-means on (x, y, intensity))

def _grid_shape(k: int, h: int, w: int) -> tuple[int, int]:
    best = (1, max(1, k))
    best_cost = None
    for rows in range(1, k + 1):
        cols = max(1, round(k / rows))
        cost = abs(rows * cols - k) + abs(rows / cols - h / w)
        if best_cost is None or cost < best_cost:
            best_cost = cost
            best = (rows, cols)
    return best


def _enforce_connectivity(assign: np.ndarray) -> np.ndarray:
    """Keep the largest 4-connected component of each label and reattach the
    rest to adjacent components, deterministically."""
    four = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
    lab = assign.copy()
    orphan = np.zeros(lab.shape, dtype=bool)
    for s in np.unique(lab):
        comps, n = ndimage.label(lab == s, structure=four)
        if n > 1:
            sizes = np.bincount(comps.ravel())
            sizes[0] = 0
            orphan |= (lab == s) & (comps != int(np.argmax(sizes)))
    h, w = lab.shape
    while orphan.any():
        taken = np.zeros_like(orphan)
        for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            nb_lab = np.full_like(lab, -1)
            nb_or = np.ones_like(orphan)
            ys = slice(max(dy, 0), h + min(dy, 0))
            yd = slice(max(-dy, 0), h + min(-dy, 0))
            xs = slice(max(dx, 0), w + min(dx, 0))
            xd = slice(max(-dx, 0), w + min(-dx, 0))
            nb_lab[yd, xd] = lab[ys, xs]
            nb_or[yd, xd] = orphan[ys, xs]
            pick = orphan & ~taken & ~nb_or & (nb_lab >= 0)
            lab[pick] = nb_lab[pick]
            taken |= pick
        if not taken.any():  # isolated orphan island: absorb into label 0
            lab[orphan] = int(lab[~orphan].min()) if (~orphan).any() else 0
            taken = orphan.copy()
        orphan &= ~taken
    # compact label ids
    uniq = np.unique(lab)
    remap = np.zeros(uniq.max() + 1, dtype=np.int64)
    remap[uniq] = np.arange(len(uniq))
    return remap[lab]


def segment(
    image: GrayImage,
    num_segments_target: int,
    compactness: float = 1.0,
    seed: int = 0,
    iterations: int = 10,
) -> Segmentation:
    """SLIC-style k-means over (x, y, intensity).  Fully deterministic:
    centers initialize on a regular grid, so the seed does not influence
    the result; it is accepted for interface stability."""
    if num_segments_target < 2:
        raise ValueError("num_segments_target must be >= 2")
    data = image.data
    h, w = data.shape
    k = min(num_segments_target, h * w)
    rows, cols = _grid_shape(k, h, w)
    s_norm = math.sqrt(h * w / (rows * cols))

    cy = ((np.arange(rows) + 0.5) * h / rows).repeat(cols)
    cx = np.tile((np.arange(cols) + 0.5) * w / cols, rows)
    ci = data[np.minimum(cy.astype(int), h - 1), np.minimum(cx.astype(int), w - 1)]

    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    assign = np.zeros((h, w), dtype=np.int64)
    for _ in range(iterations):
        d2 = (data[None] - ci[:, None, None]) ** 2 + compactness * (
            (yy[None] - cy[:, None, None]) ** 2 + (xx[None] - cx[:, None, None]) ** 2
        ) / (s_norm**2)
        assign = d2.argmin(axis=0)
        flat = assign.ravel()
        counts = np.bincount(flat, minlength=len(cy)).astype(np.float64)
        nonempty = counts > 0
        sy = np.bincount(flat, weights=yy.ravel(), minlength=len(cy))
        sx = np.bincount(flat, weights=xx.ravel(), minlength=len(cy))
        si = np.bincount(flat, weights=data.ravel(), minlength=len(cy))
        cy = np.where(nonempty, sy / np.maximum(counts, 1), cy)
        cx = np.where(nonempty, sx / np.maximum(counts, 1), cx)
        ci = np.where(nonempty, si / np.maximum(counts, 1), ci)

    labels = _enforce_connectivity(assign)
    return Segmentation(labels=labels, num_segments=int(labels.max()) + 1)


# ---------------------------------------------------------------------------
# perturbation and the interpretable value function

def perturb(instance: InterpretableInstance, z: np.ndarray) -> GrayImage:
    """Segments with z=1 keep the original pixels; the rest render at
    fill_value."""
    z = np.asarray(z).astype(bool)
    if z.shape != (instance.segmentation.num_segments,):
        raise LengthMismatch(
            f"z length {z.shape} != num_segments {instance.segmentation.num_segments}"
        )
    on = z[instance.segmentation.labels]
    return GrayImage(np.where(on, instance.image.data, instance.fill_value))


def _batch_predict(f, images: list[np.ndarray]) -> np.ndarray:
    stack = np.stack(images)
    batch_fn = getattr(f, "predict_proba_batch", None)
    if batch_fn is not None:
        return np.asarray(batch_fn(stack))
    return np.stack([np.asarray(f.predict_proba(GrayImage(im))) for im in stack])


class _ValueCache:
    """Memoized f_x over coalition bitmasks (absent segments filled)."""

    def __init__(self, f, instance: InterpretableInstance, target_class: int):
        self.f = f
        self.instance = instance
        self.target = int(target_class)
        self.d = instance.segmentation.num_segments
        self.cache: dict[int, float] = {}

    def _mask_to_z(self, mask: int) -> np.ndarray:
        z = np.zeros(self.d, dtype=bool)
        for i in range(self.d):
            if mask >> i & 1:
                z[i] = True
        return z

    def values(self, masks: list[int]) -> np.ndarray:
        missing = sorted({m for m in masks if m not in self.cache})
        if missing:
            images = [perturb(self.instance, self._mask_to_z(m)).data for m in missing]
            probs = _batch_predict(self.f, images)
            for m, p in zip(missing, probs):
                self.cache[m] = float(p[self.target])
        return np.array([self.cache[m] for m in masks])

    def value(self, mask: int) -> float:
        return self.values([mask])[0]


# ---------------------------------------------------------------------------
# LIME

def lime_explain(
    f,
    image: GrayImage,
    segmentation: Segmentation,
    cfg: LimeConfig,
    target_class: int | None = None,
) -> Attribution:
    """Sparse local surrogate: Bernoulli(0.5) coalition samples, exponential
    kernel over cosine distance, LASSO-path selection of at most k segments,
    then a weighted least squares refit on the selected set."""
    d = segmentation.num_segments
    if cfg.num_samples < d + 1:
        raise ValueError(f"num_samples must be >= num_segments + 1 = {d + 1}")
    if cfg.k > d:
        raise ValueError(f"k = {cfg.k} exceeds the number of segments {d}")
    instance = InterpretableInstance.from_image(image, segmentation)
    if target_class is None:
        target_class = int(np.argmax(np.asarray(f.predict_proba(image))))

    rng = Rng(cfg.seed)
    Z = rng.bernoulli(0.5, size=(cfg.num_samples, d))
    images = [perturb(instance, z).data for z in Z]
    y = _batch_predict(f, images)[:, target_class]
    if float(y.max() - y.min()) == 0.0:
        raise DegenerateSamples("all perturbed model outputs are identical")

    # pi(z) = exp(-D^2 / sigma^2), D = cosine distance to the all-ones vector
    on = Z.sum(axis=1)
    cos_sim = np.where(on > 0, np.sqrt(on / d), 0.0)
    dist = 1.0 - cos_sim
    weights = np.exp(-(dist**2) / cfg.kernel_width**2)

    X = Z.astype(np.float64)
    support = lasso_path_support(
        X, y, weights, cfg.k, rel_grid=np.asarray(cfg.lasso_lambda_grid)
    )
    values = np.zeros(d)
    if len(support) > 0:
        intercept, coefs = weighted_least_squares(X[:, support], y, weights)
        values[support] = coefs
    else:
        intercept = float(np.dot(weights, y) / weights.sum())
    return Attribution(
        base_value=float(intercept),
        values=values,
        target_class=target_class,
        method="lime",
        selected=tuple(int(i) for i in support),
    )


# ---------------------------------------------------------------------------
# Shapley attribution

def shap_exact(f, instance: InterpretableInstance, target_class: int) -> Attribution:
    """Direct enumeration over all coalitions of the present segments.

    phi_i = sum over S not containing i of
            |S|! (m - |S| - 1)! / m! * (v(S + i) - v(S)),
    with m the number of present segments; absent segments get phi_i = 0
    exactly, and phi_0 + sum phi_i = v(full) holds by telescoping.
    """
    d = instance.segmentation.num_segments
    present = [i for i in range(d) if instance.active[i]]
    m = len(present)
    if m > EXACT_SHAP_MAX_SEGMENTS:
        raise TooManySegments(
            f"{m} present segments exceed the exact-enumeration cap "
            f"({EXACT_SHAP_MAX_SEGMENTS})"
        )
    vc = _ValueCache(f, instance, target_class)
    all_masks = []
    for sub in range(1 << m):
        mask = 0
        for b in range(m):
            if sub >> b & 1:
                mask |= 1 << present[b]
        all_masks.append(mask)
    vc.values(all_masks)  # one batched model sweep

    if m > 0:
        weight = [
            math.factorial(s) * math.factorial(m - s - 1) / math.factorial(m)
            for s in range(m)
        ]
    phi = np.zeros(d)
    for bi, i in enumerate(present):
        others = [b for b in range(m) if b != bi]
        total = 0.0
        for sub in range(1 << (m - 1)):
            mask = 0
            size = 0
            for pos, b in enumerate(others):
                if sub >> pos & 1:
                    mask |= 1 << present[b]
                    size += 1
            total += weight[size] * (
                vc.value(mask | (1 << i)) - vc.value(mask)
            )
        phi[i] = total
    return Attribution(
        base_value=vc.value(0),
        values=phi,
        target_class=int(target_class),
        method="shap_exact",
    )


def shap_sampled(
    f,
    instance: InterpretableInstance,
    target_class: int,
    num_permutations: int,
    seed: int = 0,
) -> Attribution:
    """Permutation-sampling Shapley estimate; converges to shap_exact.

    When num_permutations covers all m! orderings the estimator enumerates
    them exactly instead of sampling, so it equals the exact value.
    """
    if num_permutations < 1:
        raise ValueError("num_permutations must be >= 1")
    d = instance.segmentation.num_segments
    present = [i for i in range(d) if instance.active[i]]
    m = len(present)
    vc = _ValueCache(f, instance, target_class)
    phi = np.zeros(d)
    if m == 0:
        return Attribution(
            base_value=vc.value(0),
            values=phi,
            target_class=int(target_class),
            method="shap_sampled",
        )

    if m <= 8 and num_permutations >= math.factorial(m):
        perms = [list(p) for p in itertools.permutations(range(m))]
    else:
        rng = Rng(seed)
        perms = [list(rng.permutation(m)) for _ in range(num_permutations)]

    for perm in perms:
        walk = [0]
        mask = 0
        for b in perm:
            mask |= 1 << present[b]
            walk.append(mask)
        vals = vc.values(walk)
        for step, b in enumerate(perm):
            phi[present[b]] += vals[step + 1] - vals[step]
    phi /= len(perms)
    return Attribution(
        base_value=vc.value(0),
        values=phi,
        target_class=int(target_class),
        method="shap_sampled",
    )
