"""Pluggable classifier contract, a desk-scale CNN with manual
forward/backward passes, and the XTEN tensor-exchange format for
activations/gradients computed by external models.

MicroCnn: conv 3x3 (C1) + ReLU + 2x2 maxpool, conv 3x3 (C2) + ReLU +
2x2 maxpool, global average pool, dense to 2 logits, softmax.  The input
is the grayscale image stacked with two fixed coordinate ramps; a pure
conv/GAP stack is translation-invariant and cannot learn position-defined
classes, and the ramps restore that capacity without touching the layer
recipe (see decisions ledger).
"""
from __future__ import annotations

import copy
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import GrayImage, Label, Rng
from .errors import (
    BadMagic,
    BadVersion,
    EmptyDataset,
    ShapeMismatch,
    ShapeOverflow,
    TruncatedFile,
)

__all__ = [
    "ActivationBundle",
    "MicroCnn",
    "micro_forward",
    "micro_backward_to_conv",
    "train_micro",
    "save_xten",
    "load_xten",
    "save_bundle",
    "load_bundle",
    "save_model",
    "load_model",
]


@dataclass(frozen=True, eq=False)
class ActivationBundle:
    """Final-conv feature maps and the target-class logit gradients."""

    activations: np.ndarray  # (K, H, W)
    gradients: np.ndarray  # (K, H, W)
    target_class: int

    def __post_init__(self):
        # values are quantized through float32 so an XTEN round trip is
        # bitwise lossless and never changes downstream Grad-CAM output
        a = np.asarray(self.activations, dtype=np.float32).astype(np.float64)
        g = np.asarray(self.gradients, dtype=np.float32).astype(np.float64)
        if a.ndim != 3 or a.shape[1] * a.shape[2] == 0:
            raise ShapeMismatch(f"activations must be (K, H, W), got {a.shape}")
        if g.shape != a.shape:
            raise ShapeMismatch(
                f"gradients shape {g.shape} != activations shape {a.shape}"
            )
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(g))):
            raise ValueError("bundle contains non-finite values")
        object.__setattr__(self, "activations", a)
        object.__setattr__(self, "gradients", g)
        object.__setattr__(self, "target_class", int(self.target_class))


# ---------------------------------------------------------------------------
# conv helpers (3x3, stride 1, zero padding 1)

def _im2col3(x: np.ndarray) -> np.ndarray:
    """(N, C, H, W) -> (N, H, W, C*9) patch matrix."""
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(2, 3))
    # win: (N, C, H, W, 3, 3) -> (N, H, W, C, 3, 3)
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(n, h, w, c * 9)


def _conv3(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Returns (output (N, Cout, H, W), cols) with cols kept for backprop."""
    n, c, h, w = x.shape
    cols = _im2col3(x)
    wmat = weight.reshape(weight.shape[0], -1)  # (Cout, C*9)
    out = cols @ wmat.T + bias
    return out.transpose(0, 3, 1, 2), cols


def _conv3_backward(
    dout: np.ndarray, cols: np.ndarray, weight: np.ndarray, in_shape
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of a 3x3 same conv: (dx, dweight, dbias)."""
    n, c, h, w = in_shape
    cout = weight.shape[0]
    d = dout.transpose(0, 2, 3, 1).reshape(-1, cout)  # (N*H*W, Cout)
    dw = (d.T @ cols.reshape(-1, c * 9)).reshape(weight.shape)
    db = d.sum(axis=0)
    dcols = (d @ weight.reshape(cout, -1)).reshape(n, h, w, c, 3, 3)
    dxp = np.zeros((n, c, h + 2, w + 2))
    for di in range(3):
        for dj in range(3):
            dxp[:, :, di : di + h, dj : dj + w] += dcols[:, :, :, :, di, dj].transpose(
                0, 3, 1, 2
            )
    return dxp[:, :, 1 : 1 + h, 1 : 1 + w], dw, db


def _maxpool2(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """2x2 stride-2 max pooling; returns (pooled, argmax index in window)."""
    n, c, h, w = x.shape
    r = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(
        n, c, h // 2, w // 2, 4
    )
    idx = r.argmax(axis=-1)
    pooled = np.take_along_axis(r, idx[..., None], axis=-1)[..., 0]
    return pooled, idx


def _maxpool2_backward(dpooled: np.ndarray, idx: np.ndarray, in_shape) -> np.ndarray:
    n, c, h, w = in_shape
    d = np.zeros((n, c, h // 2, w // 2, 4))
    np.put_along_axis(d, idx[..., None], dpooled[..., None], axis=-1)
    return (
        d.reshape(n, c, h // 2, w // 2, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, h, w)
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class MicroCnn:
    """Two-conv CNN over (image, x-ramp, y-ramp) input channels.

    Satisfies both the Classifier contract (predict_proba) and the
    GradientProvider contract (activation_bundle).
    """

    IN_CHANNELS = 3

    def __init__(
        self,
        seed: int = 0,
        conv1_filters: int = 8,
        conv2_filters: int = 16,
        input_size: int = 224,
    ):
        if input_size % 4 != 0:
            raise ValueError("input_size must be divisible by 4 (two 2x2 pools)")
        self.seed = int(seed)
        self.input_size = int(input_size)
        c1, c2 = int(conv1_filters), int(conv2_filters)
        rng = Rng(seed)

        def he_uniform(shape, fan_in):
            limit = np.sqrt(6.0 / fan_in)
            return rng.uniform(-limit, limit, size=shape)

        self.w1 = he_uniform((c1, self.IN_CHANNELS, 3, 3), self.IN_CHANNELS * 9)
        self.b1 = np.zeros(c1)
        self.w2 = he_uniform((c2, c1, 3, 3), c1 * 9)
        self.b2 = np.zeros(c2)
        self.wd = he_uniform((2, c2), c2)
        self.bd = np.zeros(2)

    # -- parameters -------------------------------------------------------
    def parameters(self) -> dict[str, np.ndarray]:
        return {
            "w1": self.w1,
            "b1": self.b1,
            "w2": self.w2,
            "b2": self.b2,
            "wd": self.wd,
            "bd": self.bd,
        }

    def clone(self) -> "MicroCnn":
        return copy.deepcopy(self)

    # -- forward ----------------------------------------------------------
    def _stack_input(self, images: np.ndarray) -> np.ndarray:
        n, h, w = images.shape
        if h != self.input_size or w != self.input_size:
            raise ShapeMismatch(
                f"expected {self.input_size}x{self.input_size} input, got {h}x{w}"
            )
        ys = np.linspace(-1.0, 1.0, h)[:, None] * np.ones((1, w))
        xs = np.ones((h, 1)) * np.linspace(-1.0, 1.0, w)[None, :]
        coords = np.broadcast_to(np.stack([xs, ys]), (n, 2, h, w))
        return np.concatenate([images[:, None], coords], axis=1)

    def forward_batch(self, images: np.ndarray) -> tuple[np.ndarray, dict]:
        """images: (N, H, W) in [0,1].  Returns (probs (N,2), cache)."""
        x = self._stack_input(np.asarray(images, dtype=np.float64))
        z1, cols1 = _conv3(x, self.w1, self.b1)
        a1 = np.maximum(z1, 0.0)
        p1, idx1 = _maxpool2(a1)
        z2, cols2 = _conv3(p1, self.w2, self.b2)
        a2 = np.maximum(z2, 0.0)  # final-conv feature maps A^k
        p2, idx2 = _maxpool2(a2)
        g = p2.mean(axis=(2, 3))  # global average pool
        logits = g @ self.wd.T + self.bd
        probs = _softmax(logits)
        cache = {
            "x": x,
            "z1": z1,
            "cols1": cols1,
            "idx1": idx1,
            "p1": p1,
            "z2": z2,
            "cols2": cols2,
            "a2": a2,
            "idx2": idx2,
            "p2": p2,
            "g": g,
            "logits": logits,
            "probs": probs,
        }
        return probs, cache

    def predict_proba(self, image: GrayImage) -> np.ndarray:
        probs, _ = self.forward_batch(image.data[None])
        return probs[0]

    def predict_proba_batch(self, images: np.ndarray) -> np.ndarray:
        probs, _ = self.forward_batch(images)
        return probs

    def logits_from_activations(self, a2: np.ndarray) -> np.ndarray:
        """Head of the network from the final-conv maps A (K, H, W)."""
        p2, _ = _maxpool2(a2[None])
        g = p2.mean(axis=(2, 3))
        return (g @ self.wd.T + self.bd)[0]

    def grad_logit_wrt_activations(self, a2: np.ndarray, target_class: int) -> np.ndarray:
        """d s_c / d A for the target-class logit s_c, A = post-ReLU conv2 maps."""
        k, h, w = a2.shape
        p2, idx2 = _maxpool2(a2[None])
        z = p2.shape[2] * p2.shape[3]
        dg = self.wd[target_class][None, :]  # (1, K)
        dp2 = np.broadcast_to(dg[:, :, None, None] / z, p2.shape)
        da2 = _maxpool2_backward(np.ascontiguousarray(dp2), idx2, (1, k, h, w))
        return da2[0]

    def activation_bundle(self, image: GrayImage, target_class: int) -> ActivationBundle:
        _, cache = self.forward_batch(image.data[None])
        a2 = cache["a2"][0]
        grads = self.grad_logit_wrt_activations(a2, target_class)
        return ActivationBundle(activations=a2, gradients=grads, target_class=target_class)

    # -- backward ---------------------------------------------------------
    def backward_batch(self, cache: dict, labels: np.ndarray) -> dict[str, np.ndarray]:
        """Cross-entropy gradients for all parameters; labels: (N,) in {0,1}."""
        n = labels.shape[0]
        probs = cache["probs"]
        dlogits = probs.copy()
        dlogits[np.arange(n), labels] -= 1.0
        dlogits /= n
        return self._backprop_from_logits(cache, dlogits)

    def _backprop_from_logits(self, cache: dict, dlogits: np.ndarray) -> dict:
        g = cache["g"]
        dwd = dlogits.T @ g
        dbd = dlogits.sum(axis=0)
        dg = dlogits @ self.wd
        p2 = cache["p2"]
        z = p2.shape[2] * p2.shape[3]
        dp2 = np.broadcast_to(dg[:, :, None, None] / z, p2.shape)
        a2 = cache["a2"]
        da2 = _maxpool2_backward(np.ascontiguousarray(dp2), cache["idx2"], a2.shape)
        dz2 = da2 * (cache["z2"] > 0)
        dp1, dw2, db2 = _conv3_backward(dz2, cache["cols2"], self.w2, cache["p1"].shape)
        a1shape = cache["z1"].shape
        da1 = _maxpool2_backward(dp1, cache["idx1"], a1shape)
        dz1 = da1 * (cache["z1"] > 0)
        _, dw1, db1 = _conv3_backward(dz1, cache["cols1"], self.w1, cache["x"].shape)
        return {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2, "wd": dwd, "bd": dbd}


def micro_forward(model: MicroCnn, image: GrayImage) -> tuple[np.ndarray, dict]:
    """Deterministic forward pass; probabilities sum to 1."""
    probs, cache = model.forward_batch(image.data[None])
    return probs[0], cache


def micro_backward_to_conv(
    model: MicroCnn, image: GrayImage, target_class: int
) -> ActivationBundle:
    """Final-conv activations and d s_c / d A^k for the target-class logit."""
    return model.activation_bundle(image, target_class)


def _labels_array(dataset) -> np.ndarray:
    order = {Label.BENIGN: 0, Label.MALIGNANT: 1}
    return np.array([order[s.label] for s in dataset], dtype=np.int64)


def train_micro(
    model: MicroCnn,
    dataset: list,
    epochs: int = 20,
    lr: float = 0.5,
    seed: int = 0,
    batch_size: int = 16,
) -> tuple[MicroCnn, list[float]]:
    """Plain SGD on cross-entropy.  Returns (trained copy, per-epoch loss)."""
    if len(dataset) == 0:
        raise EmptyDataset("training requires at least one sample")
    images = np.stack([s.image.data for s in dataset])
    labels = _labels_array(dataset)
    trained = model.clone()
    rng = Rng(seed)
    curve: list[float] = []
    n = len(dataset)
    for _ in range(int(epochs)):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, batch_size):
            batch = order[start : start + batch_size]
            probs, cache = trained.forward_batch(images[batch])
            eps = 1e-12
            losses.append(
                float(-np.log(probs[np.arange(len(batch)), labels[batch]] + eps).mean())
            )
            if lr != 0.0:
                grads = trained.backward_batch(cache, labels[batch])
                for name, p in trained.parameters().items():
                    p -= lr * grads[name]
        curve.append(float(np.mean(losses)))
    return trained, curve


# ---------------------------------------------------------------------------
# XTEN tensor-exchange format:
#   magic 'XTEN' | u32 version=1 | u32 ndim | ndim x u64 dims |
#   row-major little-endian float32 payload

_XTEN_MAGIC = b"XTEN"
_XTEN_VERSION = 1
_MAX_ELEMENTS = 1 << 40  # sanity cap against absurd declared shapes


def save_xten(arr: np.ndarray, path) -> None:
    arr = np.asarray(arr, dtype="<f4")
    with open(path, "wb") as f:
        f.write(_XTEN_MAGIC)
        f.write(struct.pack("<II", _XTEN_VERSION, arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        f.write(np.ascontiguousarray(arr).tobytes())


def load_xten(path) -> np.ndarray:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 4 or raw[:4] != _XTEN_MAGIC:
        raise BadMagic(f"{path}: not an XTEN file")
    if len(raw) < 12:
        raise TruncatedFile(f"{path}: header truncated")
    version, ndim = struct.unpack_from("<II", raw, 4)
    if version != _XTEN_VERSION:
        raise BadVersion(f"{path}: unsupported XTEN version {version}")
    header_end = 12 + 8 * ndim
    if len(raw) < header_end:
        raise TruncatedFile(f"{path}: dimension block truncated")
    dims = struct.unpack_from(f"<{ndim}Q", raw, 12)
    count = 1
    for d in dims:
        count *= d
        if count > _MAX_ELEMENTS:
            raise ShapeOverflow(f"{path}: declared shape {dims} is implausibly large")
    if len(raw) - header_end < 4 * count:
        raise TruncatedFile(
            f"{path}: payload holds {(len(raw) - header_end) // 4} of {count} floats"
        )
    arr = np.frombuffer(raw, dtype="<f4", count=count, offset=header_end)
    return arr.reshape(dims).astype(np.float64)


def save_bundle(bundle: ActivationBundle, path) -> None:
    """Writes <stem>.activations.xten, <stem>.gradients.xten plus a JSON
    sidecar at `path` linking them."""
    path = Path(path)
    act_name = path.stem + ".activations.xten"
    grad_name = path.stem + ".gradients.xten"
    save_xten(bundle.activations, path.parent / act_name)
    save_xten(bundle.gradients, path.parent / grad_name)
    sidecar = {
        "activations": act_name,
        "gradients": grad_name,
        "target_class": bundle.target_class,
    }
    path.write_text(json.dumps(sidecar, indent=2))


def load_bundle(path) -> ActivationBundle:
    path = Path(path)
    sidecar = json.loads(path.read_text())
    acts = load_xten(path.parent / sidecar["activations"])
    grads = load_xten(path.parent / sidecar["gradients"])
    return ActivationBundle(
        activations=acts, gradients=grads, target_class=int(sidecar["target_class"])
    )


# ---------------------------------------------------------------------------
# model serialization: XTEN per layer plus a JSON manifest

def save_model(model: MicroCnn, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": "xaib-microcnn",
        "version": 1,
        "seed": model.seed,
        "input_size": model.input_size,
        "layers": {},
    }
    for name, arr in model.parameters().items():
        fname = f"{name}.xten"
        save_xten(arr, directory / fname)
        manifest["layers"][name] = {"file": fname, "shape": list(arr.shape)}
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))


def load_model(directory) -> MicroCnn:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("format") != "xaib-microcnn":
        raise BadMagic(f"{directory}: not a MicroCnn archive")
    if manifest.get("version") != 1:
        raise BadVersion(f"{directory}: unsupported archive version")
    layers = {
        name: load_xten(directory / meta["file"])
        for name, meta in manifest["layers"].items()
    }
    model = MicroCnn(
        seed=manifest["seed"],
        conv1_filters=layers["w1"].shape[0],
        conv2_filters=layers["w2"].shape[0],
        input_size=manifest["input_size"],
    )
    for name, arr in layers.items():
        setattr(model, name, arr)
    return model
