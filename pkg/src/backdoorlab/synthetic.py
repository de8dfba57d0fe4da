"""Procedurally generated desk-scale image classification data.

Each class is a fixed smooth random template; samples are jittered copies
(small shift, scale, rotation) with additive noise. The classes are easily
separable, so small models reach high accuracy within a few epochs, which
is exactly what fast end-to-end attack/defense experiments need. Fully
deterministic given the seed.
"""

import numpy as np

from .imageops import affine_warp, resize_bilinear, to_uint8
from .poison.data import DatasetHandle


def _border_window(image_size, margin=5, floor=0.35):
    """Dim toward the borders, like roughly centered photographic subjects.

    A nonzero floor keeps faint class-informative texture in the margins,
    so border pixels still carry benign gradient signal.
    """
    h, w = image_size
    ramp_h = np.clip(np.minimum(np.arange(h), np.arange(h)[::-1]) / margin, 0, 1)
    ramp_w = np.clip(np.minimum(np.arange(w), np.arange(w)[::-1]) / margin, 0, 1)
    return (floor + (1 - floor) * np.outer(ramp_h, ramp_w))[..., None]


def _class_template(rng, image_size, channels):
    coarse = rng.uniform(0.0, 1.0, size=(7, 7, channels))
    field = resize_bilinear(coarse, image_size)
    lo, hi = field.min(), field.max()
    return 0.15 + 0.8 * (field - lo) / max(hi - lo, 1e-9)


def _render(template, window, rng, noise):
    angle = rng.uniform(-8.0, 8.0)
    shift = rng.uniform(-3.0, 3.0, size=2)
    scale = rng.uniform(0.8, 1.15)
    # Most samples dim toward the borders; some keep bright content at the
    # edges, as natural photos do.
    img = template * window if rng.random() < 0.7 else template
    img = affine_warp(img, angle_deg=angle, translate=tuple(shift),
                      scale=scale, fill=0.0)
    img = img + rng.normal(0.0, noise, size=img.shape)
    return to_uint8(img)


def make_classification_data(num_train, num_test, image_size=(28, 28),
                             channels=1, num_classes=10, seed=0, noise=0.10):
    """Build matching train/test DatasetHandles.

    Labels cycle through the classes, so both splits are balanced up to
    rounding. Train and test samples come from disjoint RNG streams of the
    same class templates.
    """
    templates = [
        _class_template(np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(7, k))),
            image_size, channels)
        for k in range(num_classes)
    ]
    window = _border_window(image_size)

    def build(count, stream, split):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))
        images = np.empty((count,) + tuple(image_size) + (channels,), dtype=np.uint8)
        labels = np.empty(count, dtype=np.int64)
        for i in range(count):
            k = i % num_classes
            images[i] = _render(templates[k], window, rng, noise)
            labels[i] = k
        return DatasetHandle(images, labels, num_classes, split=split, seed=seed)

    return build(num_train, 1, "train"), build(num_test, 2, "test")
