"""Transform-chain building blocks.

Transforms operate on float32 images in [0, 1]. Plain callables must be pure
in the image; transforms that need randomness subclass
``StochasticTransform`` and receive a per-sample ``numpy.random.Generator``
derived from (seed, epoch, index), so results never depend on iteration
order or worker count.
"""

import numpy as np


def sample_rng(seed, epoch, index):
    """Deterministic RNG for one sample access."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFF,
                               spawn_key=(int(epoch), int(index))))


class StochasticTransform:
    """Base class marking transforms that consume per-sample randomness."""

    def __call__(self, img, rng):
        raise NotImplementedError


class HorizontalFlip:
    """Deterministic left-right flip."""

    def __call__(self, img):
        return img[:, ::-1]


class RandomHorizontalFlip(StochasticTransform):
    def __init__(self, p=0.5):
        self.p = float(p)

    def __call__(self, img, rng):
        if rng.random() < self.p:
            return img[:, ::-1]
        return img


class Invert:
    """Intensity inversion, x -> 1 - x."""

    def __call__(self, img):
        return 1.0 - img


class RandomShiftPad(StochasticTransform):
    """Zero-pad by ``max_shift`` then crop back at a random window.

    The standard crop-with-padding augmentation: content translates by up
    to ``max_shift`` pixels per axis, vacated regions are zero.
    """

    def __init__(self, max_shift=4):
        if max_shift < 0:
            raise ValueError("max_shift must be >= 0")
        self.max_shift = int(max_shift)

    def __call__(self, img, rng):
        if self.max_shift == 0:
            return img
        h, w = img.shape[:2]
        s = self.max_shift
        padded = np.zeros((h + 2 * s, w + 2 * s) + img.shape[2:], dtype=img.dtype)
        padded[s:s + h, s:s + w] = img
        oy, ox = rng.integers(0, 2 * s + 1, size=2)
        return padded[oy:oy + h, ox:ox + w]


class GainOffset:
    """Affine intensity map x -> gain * x + offset (clamped by the chain)."""

    def __init__(self, gain=1.0, offset=0.0):
        self.gain = float(gain)
        self.offset = float(offset)

    def __call__(self, img):
        return self.gain * img + self.offset


def apply_chain(img, chain, rng=None):
    """Apply a transform chain to one float image, clamping after each step."""
    for t in chain:
        if isinstance(t, StochasticTransform):
            if rng is None:
                raise ValueError("stochastic transform in chain but no rng given")
            img = t(img, rng)
        else:
            img = t(img)
        img = np.clip(img, 0.0, 1.0)
    return img
