"""Poisoned dataset construction.

The poisoned train split leaves every non-selected sample untouched
(bit-identical floats) and, for selected samples, splices the trigger
transform into the chain at the configured position and relabels to the
target class. The poisoned test split drops samples already labeled with
the target class, triggers everything that remains, and keeps the original
labels for evaluation.
"""

import os

import numpy as np

from .data import DatasetHandle, export_folder, write_json
from .plan import PoisonManifest, PoisonPlan


def _spliced(chain, trigger_op, insert_index):
    chain = list(chain)
    j = len(chain) if insert_index is None else int(insert_index)
    if not 0 <= j <= len(chain):
        raise ValueError(f"insert index {j} outside [0, {len(chain)}]")
    return chain[:j] + [trigger_op] + chain[j:]


class PoisonedTrainDataset(DatasetHandle):
    """Train split with a poisoned subset; shares storage with the benign set."""

    def __init__(self, benign: DatasetHandle, plan: PoisonPlan, trigger_op):
        super().__init__(benign.images, benign.labels, benign.num_classes,
                         benign.transform_chain, split="train",
                         class_names=benign.class_names, seed=plan.seed)
        self.plan = plan
        self.poisoned_set = frozenset(int(i) for i in plan.poisoned_indices)
        self.poisoned_chain = _spliced(benign.transform_chain, trigger_op,
                                       plan.train_insert_index)
        self.original_labels = benign.labels

    def chain_for(self, index):
        if index in self.poisoned_set:
            return self.poisoned_chain
        return self.transform_chain

    def label_for(self, index):
        if index in self.poisoned_set:
            return self.plan.y_target
        return self.labels[index]


class PoisonedTestDataset(DatasetHandle):
    """Fully triggered test split, restricted to non-target-class samples."""

    def __init__(self, benign: DatasetHandle, plan: PoisonPlan, trigger_op):
        keep = np.flatnonzero(benign.labels != plan.y_target)
        super().__init__(benign.images[keep], benign.labels[keep],
                         benign.num_classes, benign.transform_chain,
                         split="test", class_names=benign.class_names,
                         seed=plan.seed)
        self.plan = plan
        self.source_indices = keep
        self.original_labels = benign.labels[keep]
        self.poisoned_chain = _spliced(benign.transform_chain, trigger_op,
                                       plan.test_insert_index)

    def chain_for(self, index):
        return self.poisoned_chain

    def label_for(self, index):
        return self.plan.y_target


def build_poisoned_dataset(benign_train, benign_test, plan: PoisonPlan,
                           trigger_op, trigger_descriptor=None,
                           test_trigger_op=None):
    """Build poisoned train/test splits plus their ground-truth manifest.

    ``test_trigger_op`` lets training-controlled attacks trigger the test
    split differently from the train split (default: same transform).
    """
    plan.validate_against(benign_train)
    poisoned_train = PoisonedTrainDataset(benign_train, plan, trigger_op)
    poisoned_test = PoisonedTestDataset(benign_test, plan,
                                        test_trigger_op or trigger_op)
    manifest = PoisonManifest(
        poisoned_indices=[int(i) for i in plan.poisoned_indices],
        y_target=plan.y_target,
        trigger=trigger_descriptor or {"type": type(trigger_op).__name__,
                                       "params": {}, "seed": plan.seed},
        original_labels=[int(benign_train.labels[i])
                         for i in plan.poisoned_indices],
    )
    return poisoned_train, poisoned_test, manifest


def export_poisoned_dataset(poisoned_train, manifest: PoisonManifest, root):
    """Render and export the poisoned train split plus ``manifest.json``."""
    os.makedirs(root, exist_ok=True)
    export_folder(poisoned_train, root, render=True)
    write_json(os.path.join(root, "manifest.json"), manifest.to_dict())
