import struct

import numpy as np
import pytest

from xaib.core import GrayImage, Label, Rng
from xaib.errors import (
    BadMagic,
    BadVersion,
    EmptyDataset,
    ShapeMismatch,
    ShapeOverflow,
    TruncatedFile,
)
from xaib.model import (
    ActivationBundle,
    MicroCnn,
    load_bundle,
    load_model,
    load_xten,
    micro_backward_to_conv,
    micro_forward,
    save_bundle,
    save_model,
    save_xten,
    train_micro,
)

from conftest import quadrant_samples

LABEL_INDEX = {Label.BENIGN: 0, Label.MALIGNANT: 1}


def small_model(seed=0, size=16):
    return MicroCnn(seed=seed, conv1_filters=4, conv2_filters=6, input_size=size)


def rand_image(size=16, seed=0):
    return GrayImage(np.random.default_rng(seed).random((size, size)))


def accuracy(model, samples):
    preds = [int(np.argmax(model.predict_proba(s.image))) for s in samples]
    return float(np.mean([p == LABEL_INDEX[s.label] for p, s in zip(preds, samples)]))


class TestForward:
    def test_zero_weights_give_uniform_probs(self):
        m = small_model()
        for p in m.parameters().values():
            p[...] = 0.0
        probs, _ = micro_forward(m, rand_image())
        np.testing.assert_allclose(probs, [0.5, 0.5])

    def test_deterministic(self):
        m = small_model(3)
        img = rand_image(seed=5)
        a, _ = micro_forward(m, img)
        b, _ = micro_forward(m, img)
        np.testing.assert_array_equal(a, b)

    def test_probs_sum_to_one(self):
        probs, _ = micro_forward(small_model(1), rand_image(seed=2))
        assert probs.sum() == pytest.approx(1.0)
        assert (probs >= 0).all()

    def test_wrong_input_size_rejected(self):
        with pytest.raises(ShapeMismatch):
            small_model(size=16).predict_proba(rand_image(size=20))


class TestGradients:
    def test_activation_gradient_matches_fd_on_linear_head(self):
        # The head (pool -> GAP -> dense) is piecewise linear; on strictly
        # positive activations with no pooling ties, central differences
        # are exact up to floating point.
        m = small_model(7)
        rng = np.random.default_rng(1)
        hh = m.input_size // 2
        a2 = rng.uniform(0.5, 1.5, size=(6, hh, hh))
        for target in (0, 1):
            analytic = m.grad_logit_wrt_activations(a2, target)
            eps = 1e-6
            probes = [
                tuple(int(v) for v in rng.integers(0, s, size=3))
                for s in [a2.shape] * 60
            ]
            for k, i, j in probes:
                up = a2.copy()
                up[k, i, j] += eps
                dn = a2.copy()
                dn[k, i, j] -= eps
                fd = (
                    m.logits_from_activations(up)[target]
                    - m.logits_from_activations(dn)[target]
                ) / (2 * eps)
                denom = max(abs(fd), abs(analytic[k, i, j]), 1e-8)
                assert abs(fd - analytic[k, i, j]) / denom < 1e-4

    def test_weight_gradients_match_fd(self):
        m = small_model(11, size=8)
        img = rand_image(size=8, seed=9)
        probs, cache = m.forward_batch(img.data[None])
        labels = np.array([1])
        grads = m.backward_batch(cache, labels)
        rng = np.random.default_rng(4)
        eps = 1e-5

        def loss_of(model):
            p, _ = model.forward_batch(img.data[None])
            return float(-np.log(p[0, 1] + 1e-12))

        checked = 0
        for name, param in m.parameters().items():
            flat = param.reshape(-1)
            for idx in rng.choice(flat.size, size=min(6, flat.size), replace=False):
                orig = flat[idx]
                flat[idx] = orig + eps
                up = loss_of(m)
                flat[idx] = orig - eps
                dn = loss_of(m)
                flat[idx] = orig
                fd = (up - dn) / (2 * eps)
                g = grads[name].reshape(-1)[idx]
                assert abs(fd - g) <= 1e-4 * max(abs(fd), abs(g), 1e-3)
                checked += 1
        assert checked >= 30

    def test_gradients_shape_matches_activations(self):
        m = small_model(2)
        bundle = micro_backward_to_conv(m, rand_image(seed=3), 1)
        assert bundle.gradients.shape == bundle.activations.shape

    def test_zeroed_channel_gets_zero_gradient(self):
        # if the dense weight for channel k is zero, s_c ignores it
        m = small_model(5)
        m.wd[:, 2] = 0.0
        bundle = micro_backward_to_conv(m, rand_image(seed=6), 0)
        assert not bundle.gradients[2].any()


class TestTrainMicro:
    def test_quadrant_fixture_reaches_95_accuracy(self):
        samples = quadrant_samples(100, size=56, radius=(4, 8), seed=0)
        from xaib.augment import stratified_split

        split = stratified_split(samples, 0.9, seed=1)
        model = MicroCnn(seed=0, input_size=56)
        trained, curve = train_micro(model, split.train, epochs=20, lr=0.5, seed=0)
        assert curve[-1] < curve[0]
        assert accuracy(trained, split.test) >= 0.95

    def test_lr_zero_leaves_weights_unchanged(self):
        samples = quadrant_samples(3, size=32, radius=(4, 6))
        model = MicroCnn(seed=0, input_size=32)
        before = {k: v.copy() for k, v in model.parameters().items()}
        trained, _ = train_micro(model, samples, epochs=2, lr=0.0, seed=0)
        for k, v in trained.parameters().items():
            np.testing.assert_array_equal(v, before[k])

    def test_same_seed_identical_weights(self):
        samples = quadrant_samples(4, size=32, radius=(4, 6))
        model = MicroCnn(seed=2, input_size=32)
        a, _ = train_micro(model, samples, epochs=3, lr=0.1, seed=5)
        b, _ = train_micro(model, samples, epochs=3, lr=0.1, seed=5)
        for k in a.parameters():
            np.testing.assert_array_equal(a.parameters()[k], b.parameters()[k])

    def test_input_model_not_mutated(self):
        samples = quadrant_samples(3, size=32, radius=(4, 6))
        model = MicroCnn(seed=0, input_size=32)
        before = {k: v.copy() for k, v in model.parameters().items()}
        train_micro(model, samples, epochs=1, lr=0.5, seed=0)
        for k, v in model.parameters().items():
            np.testing.assert_array_equal(v, before[k])

    def test_empty_dataset(self):
        with pytest.raises(EmptyDataset):
            train_micro(MicroCnn(seed=0, input_size=32), [], epochs=1, lr=0.1)


class TestXten:
    def test_roundtrip_bitwise(self, tmp_path):
        arr = np.random.default_rng(0).random((3, 5, 7)).astype(np.float32)
        p = tmp_path / "a.xten"
        save_xten(arr, p)
        back = load_xten(p)
        assert (back == arr).all()

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.xten"
        p.write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(BadMagic):
            load_xten(p)

    def test_bad_version(self, tmp_path):
        p = tmp_path / "v9.xten"
        p.write_bytes(b"XTEN" + struct.pack("<II", 9, 1) + struct.pack("<Q", 1) + b"\x00" * 4)
        with pytest.raises(BadVersion):
            load_xten(p)

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "short.xten"
        p.write_bytes(b"XTEN" + struct.pack("<II", 1, 1) + struct.pack("<Q", 100))
        with pytest.raises(TruncatedFile):
            load_xten(p)

    def test_shape_overflow(self, tmp_path):
        p = tmp_path / "huge.xten"
        p.write_bytes(
            b"XTEN" + struct.pack("<II", 1, 2) + struct.pack("<QQ", 1 << 40, 1 << 40)
        )
        with pytest.raises(ShapeOverflow):
            load_xten(p)


class TestBundleIO:
    def test_roundtrip(self, tmp_path):
        m = small_model(1)
        bundle = micro_backward_to_conv(m, rand_image(seed=1), 1)
        sidecar = tmp_path / "b.json"
        save_bundle(bundle, sidecar)
        back = load_bundle(sidecar)
        assert (back.activations == bundle.activations).all()
        assert (back.gradients == bundle.gradients).all()
        assert back.target_class == bundle.target_class

    def test_gradcam_invariant_under_roundtrip(self, tmp_path):
        from xaib.explain import grad_cam

        m = small_model(8)
        bundle = micro_backward_to_conv(m, rand_image(seed=8), 0)
        direct = grad_cam(bundle, (16, 16))
        save_bundle(bundle, tmp_path / "b.json")
        loaded = grad_cam(load_bundle(tmp_path / "b.json"), (16, 16))
        np.testing.assert_array_equal(direct.data, loaded.data)


class TestModelIO:
    def test_save_load_predictions_match(self, tmp_path):
        # weights are stored as float32, so predictions agree to float32
        # precision rather than bitwise
        m = small_model(6)
        save_model(m, tmp_path / "model")
        back = load_model(tmp_path / "model")
        img = rand_image(seed=4)
        np.testing.assert_allclose(
            m.predict_proba(img), back.predict_proba(img), atol=1e-6
        )

    def test_load_is_stable(self, tmp_path):
        # a reloaded model re-saved gives bitwise-identical files
        m = small_model(6)
        save_model(m, tmp_path / "m1")
        back = load_model(tmp_path / "m1")
        save_model(back, tmp_path / "m2")
        for p1 in sorted((tmp_path / "m1").iterdir()):
            p2 = tmp_path / "m2" / p1.name
            assert p1.read_bytes() == p2.read_bytes()
