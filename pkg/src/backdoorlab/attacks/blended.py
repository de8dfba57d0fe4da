"""Blended attack: a full-image pattern mixed in at low opacity, invisible
at small blend weights. With a binary weight mask it degenerates to the
stamped patch."""

import numpy as np

from ..poison.triggers import StampTrigger, TriggerPattern, uniform_blend
from .base import Attack


class Blended(Attack):
    """Low-opacity blend poisoning.

    ``weight`` may be a scalar (uniform blend over the whole image,
    default 0.1) or a full per-pixel mask.
    """

    def __init__(self, train_dataset, test_dataset, model, loss=None,
                 y_target=1, poisoned_rate=0.05, pattern=None, weight=0.1,
                 **kwargs):
        if pattern is None:
            raise ValueError("Blended requires a pattern image")
        if np.isscalar(weight):
            self.trigger = uniform_blend(pattern, alpha=float(weight))
        else:
            self.trigger = TriggerPattern(pattern, weight)
        self.trigger.validate_for(train_dataset.image_shape)
        super().__init__(train_dataset, test_dataset, model, loss,
                         y_target=y_target, poisoned_rate=poisoned_rate,
                         **kwargs)

    def _build_trigger(self):
        descriptor = {"type": "blend", "params": self.trigger.params(),
                      "seed": self.seed}
        return StampTrigger(self.trigger), descriptor
