"""Model repair by channel pruning.

Channels of the target layer that stay quietest on benign data are the
usual hiding place for backdoor features; masking the lowest-mean-activation
fraction removes them without touching the weights themselves.
"""

import copy
import math

import numpy as np
import torch

from ..training.harness import evaluate
from ..training.models import ModelHandle


def _named_module(module, layer):
    modules = dict(module.named_modules())
    if layer not in modules or layer == "":
        known = [n for n in modules if n]
        raise ValueError(f"unknown layer {layer!r}; model layers: {known}")
    return modules[layer]


def collect_channel_means(model: ModelHandle, layer, dataset, batch_size=128):
    """Mean activation per channel of ``layer`` over a dataset."""
    target = _named_module(model.module, layer)
    sums = None
    count = 0

    def hook(_mod, _inputs, output):
        nonlocal sums, count
        out = output.detach()
        reduce_dims = [0] + list(range(2, out.dim()))
        batch_sum = out.sum(dim=reduce_dims) / max(
            1, int(np.prod([out.shape[d] for d in reduce_dims[1:]])))
        sums = batch_sum if sums is None else sums + batch_sum
        count += out.shape[0]

    handle = target.register_forward_hook(hook)
    try:
        model.module.eval()
        with torch.no_grad():
            for start in range(0, len(dataset), batch_size):
                idx = range(start, min(start + batch_size, len(dataset)))
                imgs = np.stack([dataset[i][0].transpose(2, 0, 1) for i in idx])
                model.module(torch.from_numpy(np.ascontiguousarray(imgs)))
    finally:
        handle.remove()
    if count == 0:
        raise ValueError("benign dataset is empty")
    return (sums / count).cpu().numpy()


def apply_channel_mask(model: ModelHandle, layer, mask):
    """Force the masked-out channels of ``layer`` to zero on every forward."""
    target = _named_module(model.module, layer)
    mask_t = torch.from_numpy(np.asarray(mask, dtype=np.float32))

    def hook(_mod, _inputs, output):
        shape = [1, -1] + [1] * (output.dim() - 2)
        return output * mask_t.view(shape).to(output.dtype)

    target.register_forward_hook(hook)
    model.extras.setdefault("prune_masks", {})[layer] = \
        np.asarray(mask, dtype=np.float32).tolist()
    return model


def prune_repair(model: ModelHandle, benign_set, prune_layer, prune_fraction,
                 batch_size=128):
    """Mask the ceil(fraction * C) lowest-mean-activation channels.

    Returns a repaired copy; the original model is untouched. fraction 0 is
    a no-op copy, fraction 1 silences the whole layer.
    """
    if not 0.0 <= prune_fraction <= 1.0:
        raise ValueError(f"prune_fraction must lie in [0, 1], got {prune_fraction}")
    means = collect_channel_means(model, prune_layer, benign_set, batch_size)
    repaired = ModelHandle(model.architecture, model.num_classes,
                           model.image_shape, copy.deepcopy(model.module),
                           copy.deepcopy(model.extras))
    channels = len(means)
    k = math.ceil(prune_fraction * channels)
    if k == 0:
        return repaired, means
    order = np.argsort(means, kind="stable")
    mask = np.ones(channels, dtype=np.float32)
    mask[order[:k]] = 0.0
    apply_channel_mask(repaired, prune_layer, mask)
    return repaired, means


class Pruning:
    """Model-repairing defense masking low-activation channels."""

    def __init__(self, train_dataset, test_dataset, model, layer,
                 prune_rate=0.2):
        if not isinstance(model, ModelHandle):
            raise ValueError("model must be a ModelHandle")
        self.train_dataset = train_dataset
        self.test_dataset = test_dataset
        self.model = model
        self.layer = layer
        self.prune_rate = float(prune_rate)
        self.repaired = None
        self.channel_means = None

    def repair(self, schedule=None):
        batch_size = (schedule or {}).get("batch_size", 128) \
            if isinstance(schedule, dict) else 128
        self.repaired, self.channel_means = prune_repair(
            self.model, self.train_dataset, self.layer, self.prune_rate,
            batch_size)
        return self.channel_means

    def get_model(self):
        if self.repaired is None:
            raise RuntimeError("model not repaired yet: call repair() first")
        return self.repaired.snapshot()

    def test(self, dataset, schedule):
        if self.repaired is None:
            raise RuntimeError("model not repaired yet: call repair() first")
        return evaluate(self.repaired, dataset, schedule)
