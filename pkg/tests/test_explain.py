import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xaib.core import GrayImage, Heatmap, Rng, Segmentation
from xaib.errors import DegenerateSamples, LengthMismatch, TooManySegments
from xaib.explain import (
    EXACT_SHAP_MAX_SEGMENTS,
    InterpretableInstance,
    LimeConfig,
    grad_cam,
    lime_explain,
    perturb,
    segment,
    shap_exact,
    shap_sampled,
)
from xaib.model import ActivationBundle

from conftest import TableModel, striped_instance


def brute_force_shap(fn, d):
    """Direct Eq-over-all-subsets oracle for a value function on {0,1}^d."""
    phi = np.zeros(d)
    idx = list(range(d))
    for i in idx:
        rest = [j for j in idx if j != i]
        for r in range(len(rest) + 1):
            for subset in itertools.combinations(rest, r):
                z = np.zeros(d, dtype=bool)
                z[list(subset)] = True
                without = fn(z)
                z[i] = True
                with_i = fn(z)
                weight = (
                    math.factorial(r) * math.factorial(d - r - 1) / math.factorial(d)
                )
                phi[i] += weight * (with_i - without)
    return phi


class TestGradCam:
    def test_zero_gradients_zero_heatmap(self):
        acts = np.random.default_rng(0).random((4, 8, 8))
        bundle = ActivationBundle(acts, np.zeros_like(acts), target_class=0)
        h = grad_cam(bundle, (16, 16))
        assert not h.data.any()

    def test_unit_activations_unit_gradients(self):
        acts = np.ones((1, 2, 2))
        bundle = ActivationBundle(acts, np.ones_like(acts), target_class=1)
        h = grad_cam(bundle, (2, 2))
        np.testing.assert_allclose(h.data, 1.0)

    def test_negative_combination_clipped_to_zero(self):
        acts = np.ones((2, 4, 4))
        grads = -np.ones_like(acts)  # alpha_k = -1, sum alpha_k A^k < 0
        bundle = ActivationBundle(acts, grads, target_class=0)
        h = grad_cam(bundle, (4, 4))
        assert not h.data.any()

    def test_output_range_and_normalization(self):
        rng = np.random.default_rng(3)
        acts = rng.random((6, 10, 10))
        grads = rng.normal(size=acts.shape)
        h = grad_cam(ActivationBundle(acts, grads, 0), (40, 40))
        assert h.shape == (40, 40)
        assert h.data.min() >= 0.0
        assert h.data.max() == pytest.approx(1.0)

    def test_deterministic_bitwise(self):
        rng = np.random.default_rng(4)
        acts = rng.random((3, 6, 6))
        grads = rng.normal(size=acts.shape)
        bundle = ActivationBundle(acts, grads, 1)
        a = grad_cam(bundle, (12, 12))
        b = grad_cam(bundle, (12, 12))
        np.testing.assert_array_equal(a.data, b.data)


class TestSegment:
    def test_constant_image_four_rectangles(self):
        seg = segment(GrayImage(np.full((64, 64), 0.5)), 4)
        assert seg.num_segments == 4
        areas = np.bincount(seg.labels.ravel())
        expected = 64 * 64 / 4
        assert (np.abs(areas - expected) / expected <= 0.20).all()

    def test_two_half_image(self):
        data = np.zeros((32, 32))
        data[:, 16:] = 1.0
        seg = segment(GrayImage(data), 2, compactness=0.2)
        assert seg.num_segments == 2
        halves = (np.arange(32)[None, :] >= 16).repeat(32, axis=0).astype(int)
        agree = (seg.labels == halves).mean()
        assert max(agree, 1 - agree) >= 0.95

    def test_every_pixel_labeled_and_connected(self):
        rng = np.random.default_rng(5)
        seg = segment(GrayImage(rng.random((48, 48))), 9)
        # Segmentation's constructor enforces coverage + connectivity
        assert seg.labels.shape == (48, 48)
        assert seg.labels.min() >= 0

    def test_deterministic(self):
        img = GrayImage(np.random.default_rng(6).random((40, 40)))
        a = segment(img, 6, seed=1)
        b = segment(img, 6, seed=2)  # seed accepted, result deterministic
        np.testing.assert_array_equal(a.labels, b.labels)


class TestPerturb:
    def test_all_ones_identity(self):
        inst = striped_instance(4)
        out = perturb(inst, np.ones(4, dtype=bool))
        np.testing.assert_array_equal(out.data, inst.image.data)

    def test_all_zeros_fill(self):
        inst = striped_instance(4)
        out = perturb(inst, np.zeros(4, dtype=bool))
        np.testing.assert_allclose(out.data, inst.fill_value)

    def test_single_segment_off(self):
        inst = striped_instance(5)
        z = np.ones(5, dtype=bool)
        z[2] = False
        out = perturb(inst, z)
        changed = out.data != inst.image.data
        np.testing.assert_array_equal(changed, inst.segmentation.labels == 2)

    def test_length_checked(self):
        inst = striped_instance(3)
        with pytest.raises(LengthMismatch):
            perturb(inst, np.ones(4, dtype=bool))


class TestLime:
    def test_recovers_sparse_linear_black_box(self):
        inst = striped_instance(6)
        model = TableModel(lambda z: 0.1 + 0.7 * z[3], inst)
        cfg = LimeConfig(num_samples=200, k=1, seed=0)
        attr = lime_explain(
            model, inst.image, inst.segmentation, cfg, target_class=1
        )
        assert attr.selected == (3,)
        assert attr.values[3] == pytest.approx(0.7, abs=0.01)
        assert attr.base_value == pytest.approx(0.1, abs=0.01)

    def test_same_seed_bitwise_identical(self):
        inst = striped_instance(5)
        model = TableModel(lambda z: 0.2 + 0.3 * z[1] + 0.4 * z[4], inst)
        cfg = LimeConfig(num_samples=100, k=2, seed=9)
        a = lime_explain(model, inst.image, inst.segmentation, cfg, 1)
        b = lime_explain(model, inst.image, inst.segmentation, cfg, 1)
        np.testing.assert_array_equal(a.values, b.values)
        assert a.selected == b.selected
        assert a.base_value == b.base_value

    def test_different_seeds_can_differ(self):
        inst = striped_instance(6)
        rng = np.random.default_rng(12)
        table = {tuple(z): rng.random() for z in itertools.product([0, 1], repeat=6)}
        model = TableModel(lambda z: table[tuple(int(v) for v in z)], inst)
        outs = set()
        for seed in range(6):
            cfg = LimeConfig(num_samples=80, k=2, seed=seed)
            attr = lime_explain(model, inst.image, inst.segmentation, cfg, 1)
            outs.add(attr.selected)
        assert len(outs) >= 2

    def test_degenerate_constant_model(self):
        inst = striped_instance(4)
        model = TableModel(lambda z: 0.5, inst)
        with pytest.raises(DegenerateSamples):
            lime_explain(
                model, inst.image, inst.segmentation, LimeConfig(seed=0, k=1), 1
            )

    def test_surrogate_beats_null_model(self):
        # weighted SSE of the refit <= weighted SSE of intercept-only fit
        inst = striped_instance(6)
        model = TableModel(lambda z: 0.1 + 0.5 * z[0] + 0.2 * z[5], inst)
        cfg = LimeConfig(num_samples=150, k=2, seed=2)
        attr = lime_explain(model, inst.image, inst.segmentation, cfg, 1)
        Z = Rng(cfg.seed).bernoulli(0.5, size=(cfg.num_samples, 6))
        y = np.array(
            [float(model.predict_proba(perturb(inst, z))[1]) for z in Z]
        )
        on = Z.sum(axis=1)
        dist = 1.0 - np.where(on > 0, np.sqrt(on / 6), 0.0)
        w = np.exp(-(dist**2) / cfg.kernel_width**2)
        pred = attr.base_value + Z.astype(float) @ attr.values
        sse_fit = float(np.dot(w, (y - pred) ** 2))
        null = float(np.dot(w, y) / w.sum())
        sse_null = float(np.dot(w, (y - null) ** 2))
        assert sse_fit <= sse_null + 1e-12

    def test_scale_covariance(self):
        inst = striped_instance(5)
        base = TableModel(lambda z: 0.1 + 0.3 * z[2] + 0.1 * z[0], inst)

        class Doubled:
            def predict_proba(self, im):
                p = base.predict_proba(im)
                return p * 2.0  # not a distribution, linearity check only

            def predict_proba_batch(self, ims):
                return base.predict_proba_batch(ims) * 2.0

        cfg = LimeConfig(num_samples=120, k=2, seed=4)
        a = lime_explain(base, inst.image, inst.segmentation, cfg, 1)
        b = lime_explain(Doubled(), inst.image, inst.segmentation, cfg, 1)
        assert a.selected == b.selected
        np.testing.assert_allclose(b.values, 2.0 * a.values, atol=1e-6)
        assert b.base_value == pytest.approx(2.0 * a.base_value, abs=1e-6)


class TestShapExact:
    def test_linear_model_coefficients(self):
        inst = striped_instance(2)
        model = TableModel(lambda z: 0.2 + 0.3 * z[0] + 0.5 * z[1], inst)
        attr = shap_exact(model, inst, target_class=1)
        assert attr.base_value == pytest.approx(0.2, abs=1e-12)
        np.testing.assert_allclose(attr.values, [0.3, 0.5], atol=1e-12)

    def test_three_segment_and_model(self):
        inst = striped_instance(3)
        model = TableModel(lambda z: float(all(z)), inst)
        attr = shap_exact(model, inst, target_class=1)
        np.testing.assert_allclose(attr.values, [1 / 3] * 3, atol=1e-12)
        oracle = brute_force_shap(lambda z: float(all(z)), 3)
        np.testing.assert_allclose(attr.values, oracle, atol=1e-12)

    def test_absent_segment_gets_zero(self):
        inst0 = striped_instance(3)
        active = np.array([True, False, True])
        inst = InterpretableInstance(
            image=inst0.image,
            segmentation=inst0.segmentation,
            active=active,
            fill_value=0.0,
        )
        model = TableModel(lambda z: 0.1 + 0.2 * z[0] + 0.3 * z[1] + 0.4 * z[2], inst)
        attr = shap_exact(model, inst, target_class=1)
        assert attr.values[1] == 0.0

    def test_local_accuracy(self):
        inst = striped_instance(5)
        rng = np.random.default_rng(1)
        table = {tuple(z): rng.random() for z in itertools.product([0, 1], repeat=5)}
        model = TableModel(lambda z: table[tuple(int(v) for v in z)], inst)
        attr = shap_exact(model, inst, target_class=1)
        fx = float(model.predict_proba(inst.image)[1])
        assert abs(attr.base_value + attr.values.sum() - fx) < 1e-9

    def test_segment_cap(self):
        inst = striped_instance(EXACT_SHAP_MAX_SEGMENTS + 1)
        model = TableModel(lambda z: float(z[0]), inst)
        with pytest.raises(TooManySegments):
            shap_exact(model, inst, target_class=1)


class TestShapSampled:
    def test_enumerates_all_permutations_equals_exact(self):
        inst = striped_instance(4)
        rng = np.random.default_rng(2)
        table = {tuple(z): rng.random() for z in itertools.product([0, 1], repeat=4)}
        model = TableModel(lambda z: table[tuple(int(v) for v in z)], inst)
        exact = shap_exact(model, inst, 1)
        sampled = shap_sampled(model, inst, 1, num_permutations=math.factorial(4))
        np.testing.assert_allclose(sampled.values, exact.values, atol=1e-12)

    def test_same_seed_identical(self):
        inst = striped_instance(9)  # m=9 forces true sampling
        rng = np.random.default_rng(3)
        table = {tuple(z): rng.random() for z in itertools.product([0, 1], repeat=9)}
        model = TableModel(lambda z: table[tuple(int(v) for v in z)], inst)
        a = shap_sampled(model, inst, 1, num_permutations=30, seed=5)
        b = shap_sampled(model, inst, 1, num_permutations=30, seed=5)
        np.testing.assert_array_equal(a.values, b.values)

    def test_converges_to_exact(self):
        inst = striped_instance(6)
        rng = np.random.default_rng(4)
        table = {tuple(z): rng.random() for z in itertools.product([0, 1], repeat=6)}
        model = TableModel(lambda z: table[tuple(int(v) for v in z)], inst)
        exact = shap_exact(model, inst, 1)
        sampled = shap_sampled(model, inst, 1, num_permutations=2000, seed=0)
        assert np.abs(sampled.values - exact.values).max() < 0.05
