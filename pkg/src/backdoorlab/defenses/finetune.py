"""Model repair by fine-tuning on local benign samples.

Only the configured layers train; everything else is frozen and comes out
bit-identical. The sentinel ``"full layers"`` unfreezes the whole model.
"""

import copy

from ..training.harness import build_loss, evaluate, train
from ..training.models import ModelHandle
from ..training.schedule import TrainSchedule

FULL_LAYERS = "full layers"


def resolve_trainable(module, layers):
    """Set requires_grad per layer selection; returns trainable param names."""
    layers = list(layers)
    if FULL_LAYERS in layers:
        for p in module.parameters():
            p.requires_grad = True
        return [name for name, _ in module.named_parameters()]
    known = [name for name, _ in module.named_modules() if name]
    for layer in layers:
        if layer not in known:
            raise ValueError(
                f"unknown layer {layer!r}; model layers: {known}")
    trainable = []
    for pname, p in module.named_parameters():
        match = any(pname == l or pname.startswith(l + ".") for l in layers)
        p.requires_grad = match
        if match:
            trainable.append(pname)
    return trainable


def finetune_repair(model: ModelHandle, benign_set, schedule,
                    layers=(FULL_LAYERS,), loss=None):
    """Fine-tune a copy of the model on clean data; frozen layers untouched."""
    if isinstance(schedule, dict):
        schedule = TrainSchedule.from_dict(schedule)
    repaired = ModelHandle(model.architecture, model.num_classes,
                           model.image_shape, copy.deepcopy(model.module),
                           copy.deepcopy(model.extras))
    resolve_trainable(repaired.module, layers)
    repaired, log = train(repaired, benign_set, build_loss(loss), schedule,
                          save_checkpoints=False)
    for p in repaired.module.parameters():
        p.requires_grad = True
    return repaired, log


class FineTuning:
    """Model-repairing defense driven by the standard repair workflow."""

    def __init__(self, train_dataset, test_dataset, model, layer=None,
                 loss=None):
        self.train_dataset = train_dataset
        self.test_dataset = test_dataset
        self.model = model if isinstance(model, ModelHandle) else None
        if self.model is None:
            raise ValueError("model must be a ModelHandle")
        self.layers = list(layer) if layer is not None else [FULL_LAYERS]
        self.loss = loss
        self.repaired = None

    def repair(self, schedule):
        self.repaired, log = finetune_repair(self.model, self.train_dataset,
                                             schedule, self.layers, self.loss)
        return log

    def get_model(self):
        if self.repaired is None:
            raise RuntimeError("model not repaired yet: call repair() first")
        return self.repaired.snapshot()

    def test(self, dataset, schedule):
        if self.repaired is None:
            raise RuntimeError("model not repaired yet: call repair() first")
        return evaluate(self.repaired, dataset, schedule)
