import numpy as np
import pytest

from xaib.core import BinaryMask, GrayImage, Label, LabeledSample, Segmentation


class TableModel:
    """Black box over the interpretable space: looks up f(z) from a table
    keyed by which segments are at their original intensity."""

    def __init__(self, fn, instance):
        self.fn = fn
        self.instance = instance

    def _z(self, data):
        labels = self.instance.segmentation.labels
        d = self.instance.segmentation.num_segments
        orig = self.instance.image.data
        z = np.zeros(d, dtype=bool)
        for i in range(d):
            sel = labels == i
            z[i] = np.allclose(data[sel], orig[sel])
        return z

    def predict_proba(self, image):
        p = float(self.fn(self._z(np.asarray(getattr(image, "data", image)))))
        return np.array([1.0 - p, p])

    def predict_proba_batch(self, images):
        return np.stack([self.predict_proba(im) for im in images])


def striped_instance(d, size=None):
    """Instance with d vertical stripe segments.  Columns alternate 0.3/0.7
    inside every segment, so neither the 0.0 fill here nor a mean fill can
    reproduce any segment's original pixels."""
    from xaib.explain import InterpretableInstance

    w = d * 2
    h = size or 6
    labels = np.repeat(np.arange(d), 2)[None, :].repeat(h, axis=0)
    seg = Segmentation(labels.astype(np.int64), d)
    cols = 0.3 + 0.4 * (np.arange(w) % 2)
    img = GrayImage(np.tile(cols, (h, 1)))
    return InterpretableInstance(
        image=img, segmentation=seg, active=np.ones(d, dtype=bool), fill_value=0.0
    )


def quadrant_samples(n_per_class, size=56, radius=(4, 8), seed=0):
    """Blob-left = benign, blob-right = malignant; ROI = blob support."""
    from xaib.dataset import SyntheticSpec, synth_samples

    spec = SyntheticSpec(
        count_per_class=n_per_class, image_size=size, blob_radius=radius, seed=seed
    )
    return synth_samples(spec)


def tiny_sample(sid, label, value=0.5, size=4):
    return LabeledSample(
        id=sid, image=GrayImage(np.full((size, size), value)), label=label
    )


def mask_from_points(shape, points):
    m = np.zeros(shape, dtype=bool)
    for y, x in points:
        m[y, x] = True
    return BinaryMask(m)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance-criterion pass/fail lines after the test run."""
    try:
        import test_acceptance
    except ImportError:
        return
    lines = getattr(test_acceptance, "RESULT_LINES", [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
