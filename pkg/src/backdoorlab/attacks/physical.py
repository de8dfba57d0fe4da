"""Physical-world attack: the stamped patch plus photometric/geometric
augmentations that imitate re-capturing the scene (lighting, viewpoint).

Training-controlled: every epoch each poisoned sample gets a fresh
augmentation draw, so the poisoned dataset is only retrievable after
training. Augmentations apply to poisoned samples only; the exported
poisoned test split carries the plain stamped trigger.
"""

import numpy as np

from ..imageops import affine_warp
from ..poison.transforms import StochasticTransform
from ..poison.triggers import StampTrigger
from .badnets import BadNets


class ColorJitter(StochasticTransform):
    """Brightness/contrast jitter with torch-style factor ranges."""

    def __init__(self, brightness=0.2, contrast=0.2):
        if brightness < 0 or contrast < 0:
            raise ValueError("jitter amplitudes must be >= 0")
        self.brightness = float(brightness)
        self.contrast = float(contrast)

    def __call__(self, img, rng):
        if self.brightness > 0:
            b = rng.uniform(max(0.0, 1 - self.brightness), 1 + self.brightness)
            img = img * b
        if self.contrast > 0:
            c = rng.uniform(max(0.0, 1 - self.contrast), 1 + self.contrast)
            if img.shape[-1] == 3:
                gray = img[..., 0] * 0.299 + img[..., 1] * 0.587 + img[..., 2] * 0.114
                mean = gray.mean()
            else:
                mean = img.mean()
            img = mean + (img - mean) * c
        return img


class RandomAffine(StochasticTransform):
    """Random rotation, translation, and isotropic scale; zero fill."""

    def __init__(self, degrees=10.0, translate=(0.1, 0.1), scale=(0.8, 0.9)):
        if degrees < 0:
            raise ValueError("degrees bound must be >= 0")
        if translate[0] < 0 or translate[1] < 0:
            raise ValueError("translate fractions must be >= 0")
        if not 0 < scale[0] <= scale[1] <= 2:
            raise ValueError("scale range must lie within (0, 2]")
        self.degrees = float(degrees)
        self.translate = (float(translate[0]), float(translate[1]))
        self.scale = (float(scale[0]), float(scale[1]))

    def __call__(self, img, rng):
        h, w = img.shape[:2]
        angle = rng.uniform(-self.degrees, self.degrees)
        tx = rng.uniform(-self.translate[0], self.translate[0]) * w
        ty = rng.uniform(-self.translate[1], self.translate[1]) * h
        sc = rng.uniform(self.scale[0], self.scale[1])
        return affine_warp(img, angle_deg=angle, translate=(tx, ty), scale=sc)


class PhysicalAugmentation(StochasticTransform):
    """Ordered list of stochastic transforms drawn fresh per sample access."""

    def __init__(self, transforms=None):
        if transforms is None:
            transforms = [ColorJitter(brightness=0.2, contrast=0.2),
                          RandomAffine(degrees=10, translate=(0.1, 0.1),
                                       scale=(0.8, 0.9))]
        self.transforms = list(transforms)

    def __call__(self, img, rng):
        for t in self.transforms:
            if isinstance(t, StochasticTransform):
                img = t(img, rng)
            else:
                img = t(img)
            img = np.clip(img, 0.0, 1.0)
        return img


class _StampThenAugment(StochasticTransform):
    def __init__(self, stamp, augmentation):
        self.stamp = stamp
        self.augmentation = augmentation

    def __call__(self, img, rng):
        return self.augmentation(np.clip(self.stamp(img), 0.0, 1.0), rng)


class PhysicalBA(BadNets):
    """Stamped patch hardened by per-epoch physical augmentations."""

    training_controlled = True

    def __init__(self, train_dataset, test_dataset, model, loss=None,
                 y_target=1, poisoned_rate=0.05, pattern=None, weight=None,
                 physical_transformations=None, **kwargs):
        if physical_transformations is None:
            physical_transformations = PhysicalAugmentation()
        elif isinstance(physical_transformations, (list, tuple)):
            physical_transformations = PhysicalAugmentation(physical_transformations)
        self.augmentation = physical_transformations
        super().__init__(train_dataset, test_dataset, model, loss,
                         y_target=y_target, poisoned_rate=poisoned_rate,
                         pattern=pattern, weight=weight, **kwargs)

    def _build_trigger(self):
        descriptor = {"type": "physical-patch", "params": self.trigger.params(),
                      "seed": self.seed}
        op = _StampThenAugment(StampTrigger(self.trigger), self.augmentation)
        return op, descriptor

    def _build_test_trigger(self):
        # Evaluation uses the plain stamped trigger, no augmentation.
        return StampTrigger(self.trigger)
