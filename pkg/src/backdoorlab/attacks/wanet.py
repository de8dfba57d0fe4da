"""Warping attack: an imperceptible elastic deformation acts as the trigger.

Only the attack mode is implemented; the cross-trigger "noise mode"
regularization is out of scope.
"""

from ..poison.warp import WarpField, WarpTrigger, build_warp_field
from .base import Attack


class WaNet(Attack):
    """Elastic-warp poisoning.

    Defaults (grid_size=4, strength=0.5) are pinned for reproducibility at
    32x32-scale inputs and can be overridden. A prebuilt ``warp_field``
    takes precedence over (grid_size, strength).
    """

    def __init__(self, train_dataset, test_dataset, model, loss=None,
                 y_target=1, poisoned_rate=0.05, grid_size=4, strength=0.5,
                 interpolation="bilinear", warp_field=None, **kwargs):
        h, w = train_dataset.image_shape[:2]
        seed = kwargs.get("seed", 0)
        if warp_field is not None:
            if not isinstance(warp_field, WarpField):
                raise ValueError("warp_field must be a WarpField")
            self.field = warp_field
        else:
            self.field = build_warp_field(grid_size, strength, (h, w), seed=seed)
        self.interpolation = interpolation
        super().__init__(train_dataset, test_dataset, model, loss,
                         y_target=y_target, poisoned_rate=poisoned_rate,
                         **kwargs)

    def _build_trigger(self):
        descriptor = {"type": "warp", "params": self.field.params(),
                      "seed": self.seed}
        return WarpTrigger(self.field, self.interpolation), descriptor
