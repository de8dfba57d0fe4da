"""Patch and blend triggers.

A trigger is a pixel pattern plus a per-pixel blend weight mask. Stamping
computes ``x' = (1 - w) * x + w * p`` in float and re-quantizes. A binary
mask gives the classic stamped corner patch; a fractional uniform mask gives
the low-opacity blended trigger.
"""

from dataclasses import dataclass, field

import numpy as np

from ..imageops import to_float, to_uint8
from .data import ImageSample


@dataclass
class TriggerPattern:
    """Trigger pixels and blend weights.

    Attributes:
        pattern: H x W or H x W x C intensity array in [0, 255].
        weight: H x W or H x W x C blend mask in [0, 1].
    """

    pattern: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        self.pattern = np.asarray(self.pattern, dtype=np.float32)
        self.weight = np.asarray(self.weight, dtype=np.float32)
        if self.pattern.shape[:2] != self.weight.shape[:2]:
            raise ValueError(
                f"pattern {self.pattern.shape} and weight {self.weight.shape} disagree")
        if self.pattern.min() < 0 or self.pattern.max() > 255:
            raise ValueError("pattern entries must lie in [0, 255]")
        if self.weight.min() < 0 or self.weight.max() > 1:
            raise ValueError("weight entries must lie in [0, 1]")

    def validate_for(self, image_shape):
        h, w = image_shape[:2]
        if self.pattern.shape[:2] != (h, w):
            raise ValueError(
                f"trigger shape {self.pattern.shape[:2]} does not match "
                f"image shape {(h, w)}")

    def params(self):
        """Compact descriptor for manifests (pattern summarized by hash)."""
        return {
            "pattern_sum": float(self.pattern.sum()),
            "weight_sum": float(self.weight.sum()),
            "shape": list(self.pattern.shape),
        }


def corner_patch(image_shape, patch_size=3, value=255):
    """White square in the bottom-right corner with a binary blend mask."""
    h, w = image_shape[:2]
    if patch_size < 1 or patch_size > min(h, w):
        raise ValueError(f"patch_size {patch_size} out of range for {image_shape}")
    pattern = np.zeros((h, w), dtype=np.float32)
    weight = np.zeros((h, w), dtype=np.float32)
    pattern[-patch_size:, -patch_size:] = value
    weight[-patch_size:, -patch_size:] = 1.0
    return TriggerPattern(pattern, weight)


def uniform_blend(pattern, alpha=0.1):
    """Full-image pattern blended everywhere at opacity ``alpha``."""
    pattern = np.asarray(pattern, dtype=np.float32)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    weight = np.full(pattern.shape[:2], alpha, dtype=np.float32)
    return TriggerPattern(pattern, weight)


def _broadcast(mask, img):
    if img.ndim == 3 and mask.ndim == 2:
        return mask[..., None]
    return mask


class StampTrigger:
    """Chain transform applying a trigger to a float [0, 1] image."""

    def __init__(self, trigger: TriggerPattern):
        self.trigger = trigger

    def __call__(self, img):
        w = _broadcast(self.trigger.weight, img)
        p = _broadcast(self.trigger.pattern, img) / 255.0
        if img.shape[:2] != self.trigger.pattern.shape[:2]:
            raise ValueError(
                f"expected image of shape {self.trigger.pattern.shape[:2]}, "
                f"got {img.shape[:2]}")
        return (1.0 - w) * img + w * p


def stamp_patch(image, trigger: TriggerPattern):
    """Stamp a trigger onto a stored uint8 sample.

    The label is untouched; relabeling is the dataset builder's job.
    """
    if isinstance(image, ImageSample):
        stamped = stamp_patch(image.pixels, trigger)
        return ImageSample(stamped, image.label, image.index)
    image = np.asarray(image)
    if image.shape[:2] != trigger.pattern.shape[:2]:
        raise ValueError(
            f"expected image of shape {trigger.pattern.shape[:2]}, "
            f"got {image.shape[:2]}")
    out = StampTrigger(trigger)(to_float(image))
    return to_uint8(out)
