"""backdoorlab: backdoor attacks and defenses for image classifiers under
one unified, reproducible harness."""

__version__ = "0.1.0"

from . import metrics
from .attacks import ATTACKS, BadNets, Blended, PhysicalBA, WaNet
from .defenses import (DEFENSES, CutMix, FineTuning, Pruning, ShrinkPad,
                       SpectralSignature)
from .metrics import (EvalReport, attack_success_rate, benign_accuracy,
                      evaluate_metric)
from .poison import (DatasetHandle, PoisonManifest, PoisonPlan, TriggerPattern,
                     WarpField, build_poisoned_dataset, build_warp_field,
                     corner_patch, load_cifar10_like, load_folder,
                     load_mnist_like, select_poison_indices, stamp_patch,
                     uniform_blend, warp_image)
from .synthetic import make_classification_data
from .training import (ModelHandle, TestSchedule, TrainSchedule, build_model,
                       evaluate, load_checkpoint, save_checkpoint,
                       set_deterministic, train)

__all__ = [
    "ATTACKS", "BadNets", "Blended", "CutMix", "DEFENSES", "DatasetHandle",
    "EvalReport", "FineTuning", "ModelHandle", "PhysicalBA", "PoisonManifest",
    "PoisonPlan", "Pruning", "ShrinkPad", "SpectralSignature", "TestSchedule",
    "TrainSchedule", "TriggerPattern", "WaNet", "WarpField",
    "attack_success_rate", "benign_accuracy", "build_model",
    "build_poisoned_dataset", "build_warp_field", "corner_patch", "evaluate",
    "evaluate_metric", "load_checkpoint", "load_cifar10_like", "load_folder",
    "load_mnist_like", "make_classification_data", "metrics",
    "save_checkpoint", "select_poison_indices", "set_deterministic",
    "stamp_patch", "train", "uniform_blend", "warp_image",
]
