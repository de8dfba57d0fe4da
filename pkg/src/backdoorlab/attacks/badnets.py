"""Stamped-patch attack: a fixed visible pattern replaces pixels wherever
the binary weight mask is set."""

from ..poison.triggers import StampTrigger, TriggerPattern, corner_patch
from .base import Attack


class BadNets(Attack):
    """Classic stamped-patch poisoning.

    ``pattern`` and ``weight`` follow the usual convention: pattern holds
    intensities in [0, 255], weight the per-pixel blend in [0, 1]. Omitting
    both uses a white 3x3 bottom-right corner patch.
    """

    def __init__(self, train_dataset, test_dataset, model, loss=None,
                 y_target=1, poisoned_rate=0.05, pattern=None, weight=None,
                 **kwargs):
        if (pattern is None) != (weight is None):
            raise ValueError("pattern and weight must be given together")
        if pattern is None:
            self.trigger = corner_patch(train_dataset.image_shape)
        else:
            self.trigger = TriggerPattern(pattern, weight)
        self.trigger.validate_for(train_dataset.image_shape)
        super().__init__(train_dataset, test_dataset, model, loss,
                         y_target=y_target, poisoned_rate=poisoned_rate,
                         **kwargs)

    def _build_trigger(self):
        descriptor = {"type": "patch", "params": self.trigger.params(),
                      "seed": self.seed}
        return StampTrigger(self.trigger), descriptor
