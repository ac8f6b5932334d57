"""PNG ingestion, CSV manifests, and deterministic synthetic fixtures.

Manifest schema: header ``id,image_path,label,roi_path``; label is
benign/malignant (case-insensitive), roi_path may be empty, and multiple
rows with the same id contribute ROIs that are merged by union.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .core import BinaryMask, GrayImage, Label, LabeledSample, Rng, derive_seed
from .errors import BadLabel, DimensionMismatch, MissingFile
from .maskeval import merge_rois

__all__ = [
    "read_png",
    "write_png",
    "ingest",
    "SyntheticSpec",
    "synth_samples",
    "generate_synthetic",
]


def read_png(path) -> GrayImage:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"image file not found: {path}")
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"), dtype=np.float64)
    return GrayImage(arr / 255.0)


def write_png(data, path) -> None:
    """Writes a GrayImage/Heatmap/BinaryMask (or raw [0,1] array) as 8-bit
    grayscale PNG."""
    arr = getattr(data, "data", data)
    if arr.dtype == bool:
        arr = arr.astype(np.float64)
    out = np.clip(np.rint(np.asarray(arr) * 255.0), 0, 255).astype(np.uint8)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(out, mode="L").save(path)


def write_rgb_png(rgb: np.ndarray, path) -> None:
    out = np.clip(np.rint(np.asarray(rgb) * 255.0), 0, 255).astype(np.uint8)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(out, mode="RGB").save(path)


def _read_roi(path) -> BinaryMask:
    img = read_png(path)
    return BinaryMask(img.data >= 0.5)


def ingest(manifest_path) -> list[LabeledSample]:
    """Loads samples from a manifest CSV; ROIs of repeated ids are merged."""
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise MissingFile(f"manifest not found: {manifest_path}")
    base = manifest_path.parent
    rows: dict[str, dict] = {}
    with open(manifest_path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"id", "image_path", "label", "roi_path"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise MissingFile(
                f"{manifest_path}: expected columns id,image_path,label,roi_path"
            )
        for lineno, row in enumerate(reader, start=2):
            sid = row["id"].strip()
            label = Label.parse(row["label"])
            image_path = base / row["image_path"].strip()
            if not image_path.is_file():
                raise MissingFile(f"{manifest_path} line {lineno}: {image_path} missing")
            entry = rows.setdefault(
                sid, {"image_path": image_path, "label": label, "rois": []}
            )
            if entry["label"] is not label:
                raise BadLabel(f"sample {sid!r}: conflicting labels across rows")
            roi_field = (row.get("roi_path") or "").strip()
            if roi_field:
                roi_path = base / roi_field
                if not roi_path.is_file():
                    raise MissingFile(
                        f"{manifest_path} line {lineno}: {roi_path} missing"
                    )
                entry["rois"].append(roi_path)
    samples = []
    for sid in sorted(rows):
        entry = rows[sid]
        image = read_png(entry["image_path"])
        roi = None
        if entry["rois"]:
            masks = [_read_roi(p) for p in entry["rois"]]
            for m in masks:
                if m.shape != image.shape:
                    raise DimensionMismatch(
                        f"sample {sid!r}: ROI shape {m.shape} != image {image.shape}"
                    )
            roi = merge_rois(masks)
        samples.append(LabeledSample(id=sid, image=image, label=entry["label"], roi=roi))
    return samples


@dataclass(frozen=True)
class SyntheticSpec:
    """Desk-scale stand-in dataset: benign images carry a bright blob in the
    left half, malignant in the right half; the ROI mask is the exact blob
    support.  Optional text blocks and border lines exercise the cleaning
    stages."""

    count_per_class: int = 20
    image_size: int = 224
    blob_radius: tuple[int, int] = (16, 30)
    text_probability: float = 0.0
    line_probability: float = 0.0
    seed: int = 0


def _render_blob(size: int, cy: float, cx: float, radius: float, amp: float):
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    d2 = (yy - cy) ** 2 + (xx - cx) ** 2
    support = d2 <= radius**2
    # soft profile, but support stays exactly the disk
    intensity = np.where(support, amp * (1.0 - 0.5 * d2 / radius**2), 0.0)
    return intensity, support


def _render_text_block(size: int, rng: Rng) -> np.ndarray:
    """Bright bar pattern near the top-left corner, away from blob rows."""
    block = np.zeros((size, size))
    y0 = int(rng.integers(4, max(5, size // 12)))
    x0 = int(rng.integers(4, max(5, size // 4)))
    bar_w = max(6, size // 10)
    for b in range(3):
        y = y0 + b * 6
        block[y : y + 3, x0 : x0 + bar_w] = 0.9
    return block

def _render_border_line(size: int, rng: Rng, band: int = 10) -> np.ndarray:
    line = np.zeros((size, size))
    edge = int(rng.integers(0, 4))
    offset = int(rng.integers(1, band))
    if edge == 0:
        line[:, offset : offset + 2] = 0.95
    elif edge == 1:
        line[:, size - offset - 2 : size - offset] = 0.95
    elif edge == 2:
        line[offset : offset + 2, :] = 0.95
    else:
        line[size - offset - 2 : size - offset, :] = 0.95
    return line


def _synth_one(spec: SyntheticSpec, label: Label, index: int):
    rng = Rng(derive_seed(spec.seed, f"{label.value}", index))
    size = spec.image_size
    r = float(rng.uniform(*spec.blob_radius))
    cy = float(rng.uniform(0.3 * size, 0.7 * size))
    if label is Label.BENIGN:
        cx = float(rng.uniform(0.18 * size, 0.36 * size))
    else:
        cx = float(rng.uniform(0.64 * size, 0.82 * size))
    amp = float(rng.uniform(0.65, 0.9))
    blob, support = _render_blob(size, cy, cx, r, amp)
    image = blob
    artifacts = np.zeros((size, size), dtype=bool)
    if rng.random() < spec.text_probability:
        text = _render_text_block(size, rng)
        text[support] = 0.0  # artifacts never overlap the lesion
        image = np.maximum(image, text)
        artifacts |= text > 0
    if rng.random() < spec.line_probability:
        line = _render_border_line(size, rng)
        line[support] = 0.0
        image = np.maximum(image, line)
        artifacts |= line > 0
    sample = LabeledSample(
        id=f"{label.value}_{index:04d}",
        image=GrayImage(np.clip(image, 0.0, 1.0)),
        label=label,
        roi=BinaryMask(support),
    )
    return sample, artifacts


def synth_samples(spec: SyntheticSpec) -> list[LabeledSample]:
    """In-memory synthetic dataset; deterministic per spec.seed."""
    out = []
    for label in (Label.BENIGN, Label.MALIGNANT):
        for i in range(spec.count_per_class):
            sample, _ = _synth_one(spec, label, i)
            out.append(sample)
    return out


def synth_samples_with_artifacts(spec: SyntheticSpec):
    """Like synth_samples but also returns the injected-artifact masks."""
    out = []
    for label in (Label.BENIGN, Label.MALIGNANT):
        for i in range(spec.count_per_class):
            out.append(_synth_one(spec, label, i))
    return out


def generate_synthetic(spec: SyntheticSpec, out_dir) -> Path:
    """Writes images, ROI masks, and a manifest CSV; returns the manifest
    path.  Output is bitwise reproducible for a fixed seed."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "rois").mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "image_path", "label", "roi_path"])
        for sample in synth_samples(spec):
            img_rel = f"images/{sample.id}.png"
            roi_rel = f"rois/{sample.id}.png"
            write_png(sample.image, out_dir / img_rel)
            write_png(sample.roi, out_dir / roi_rel)
            writer.writerow([sample.id, img_rel, sample.label.value, roi_rel])
    return manifest
