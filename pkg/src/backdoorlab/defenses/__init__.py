from .cutmix import CutMix, cutmix_batch, rand_bbox
from .finetune import FULL_LAYERS, FineTuning, finetune_repair, resolve_trainable
from .prune import (Pruning, apply_channel_mask, collect_channel_means,
                    prune_repair)
from .shrinkpad import ShrinkPad, shrink_and_pad, shrinkpad_preprocess
from .spectral import (FilterVerdict, SpectralSignature, extract_features,
                       filter_test, spectral_filter, spectral_scores)

DEFENSES = {
    "ShrinkPad": ShrinkPad,
    "FineTuning": FineTuning,
    "Pruning": Pruning,
    "CutMix": CutMix,
    "SpectralSignature": SpectralSignature,
}

__all__ = ["CutMix", "DEFENSES", "FULL_LAYERS", "FilterVerdict", "FineTuning",
           "Pruning", "ShrinkPad", "SpectralSignature", "apply_channel_mask",
           "collect_channel_means", "cutmix_batch", "extract_features",
           "filter_test", "finetune_repair", "prune_repair", "rand_bbox",
           "resolve_trainable", "shrink_and_pad", "shrinkpad_preprocess",
           "spectral_filter", "spectral_scores"]
