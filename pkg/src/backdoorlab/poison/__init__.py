from .build import (PoisonedTestDataset, PoisonedTrainDataset,
                    build_poisoned_dataset, export_poisoned_dataset)
from .data import (DatasetHandle, ImageSample, export_folder,
                   load_cifar10_like, load_folder, load_mnist_like)
from .plan import PoisonManifest, PoisonPlan, select_poison_indices
from .transforms import (GainOffset, HorizontalFlip, Invert,
                         RandomHorizontalFlip, RandomShiftPad,
                         StochasticTransform, apply_chain, sample_rng)
from .triggers import (StampTrigger, TriggerPattern, corner_patch,
                       stamp_patch, uniform_blend)
from .warp import WarpField, WarpTrigger, build_warp_field, identity_grid, warp_image

__all__ = [
    "DatasetHandle", "ImageSample", "PoisonManifest", "PoisonPlan",
    "PoisonedTestDataset", "PoisonedTrainDataset", "StampTrigger",
    "StochasticTransform", "TriggerPattern", "WarpField", "WarpTrigger",
    "apply_chain", "build_poisoned_dataset", "build_warp_field",
    "corner_patch", "export_folder", "export_poisoned_dataset",
    "identity_grid", "load_cifar10_like", "load_folder", "load_mnist_like",
    "sample_rng", "select_poison_indices", "stamp_patch", "uniform_blend",
    "warp_image", "GainOffset", "HorizontalFlip", "Invert",
    "RandomHorizontalFlip", "RandomShiftPad",
]
