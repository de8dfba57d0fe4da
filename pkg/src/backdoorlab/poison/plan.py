"""Poisoning plans, index selection, and the ground-truth manifest."""

import json
import os
from dataclasses import dataclass, field

import numpy as np


def select_poison_indices(dataset, rate, seed=0, exclude_target=False, y_target=None):
    """Choose which train samples to poison.

    Draws floor(rate * N) indices uniformly without replacement. With
    ``exclude_target`` the candidate pool is restricted to samples whose
    label differs from ``y_target``. Identical (seed, dataset, rate) yields
    an identical set.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"poisoning rate must lie in [0, 1], got {rate}")
    n = len(dataset)
    if n == 0:
        raise ValueError("dataset is empty")
    count = int(np.floor(rate * n))
    if exclude_target:
        if y_target is None:
            raise ValueError("exclude_target requires y_target")
        candidates = np.flatnonzero(dataset.labels != y_target)
    else:
        candidates = np.arange(n)
    if count > len(candidates):
        raise ValueError(
            f"insufficient eligible samples: need {count}, have {len(candidates)}")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(candidates, size=count, replace=False)
    return np.sort(chosen).astype(np.int64)


@dataclass
class PoisonPlan:
    """Everything needed to rebuild one poisoning run.

    ``train_insert_index`` / ``test_insert_index`` give the position in the
    transform chain where the trigger transform goes; None means end of
    chain (the common default).
    """

    y_target: int
    poisoned_rate: float
    poisoned_indices: np.ndarray
    train_insert_index: int = None
    test_insert_index: int = None
    deterministic: bool = False
    seed: int = 0

    @classmethod
    def create(cls, dataset, y_target, poisoned_rate, seed=0,
               exclude_target=False, train_insert_index=None,
               test_insert_index=None, deterministic=False):
        if not 0 <= y_target < dataset.num_classes:
            raise ValueError(f"y_target {y_target} outside [0, {dataset.num_classes})")
        indices = select_poison_indices(dataset, poisoned_rate, seed=seed,
                                        exclude_target=exclude_target,
                                        y_target=y_target)
        return cls(y_target=int(y_target), poisoned_rate=float(poisoned_rate),
                   poisoned_indices=indices,
                   train_insert_index=train_insert_index,
                   test_insert_index=test_insert_index,
                   deterministic=bool(deterministic), seed=int(seed))

    def validate_against(self, dataset):
        n = len(dataset)
        idx = np.asarray(self.poisoned_indices)
        if len(idx) != int(np.floor(self.poisoned_rate * n)):
            raise ValueError("poisoned index count does not match floor(rate * N)")
        if len(idx) and (idx.min() < 0 or idx.max() >= n):
            raise ValueError("poisoned indices outside the train split")
        if len(np.unique(idx)) != len(idx):
            raise ValueError("poisoned indices contain duplicates")
        for name, insert in (("train_insert_index", self.train_insert_index),
                             ("test_insert_index", self.test_insert_index)):
            if insert is not None and not 0 <= insert <= len(dataset.transform_chain):
                raise ValueError(
                    f"{name} {insert} outside [0, {len(dataset.transform_chain)}]")


@dataclass
class PoisonManifest:
    """Ground truth for one poisoned dataset build.

    Round-trips losslessly through JSON; sample-diagnosis evaluation uses
    ``poisoned_indices`` as its truth set.
    """

    poisoned_indices: list
    y_target: int
    trigger: dict
    original_labels: list = field(default_factory=list)

    def to_dict(self):
        return {
            "poisoned_indices": [int(i) for i in self.poisoned_indices],
            "y_target": int(self.y_target),
            "trigger": self.trigger,
            "original_labels": [int(v) for v in self.original_labels],
        }

    @classmethod
    def from_dict(cls, payload):
        return cls(poisoned_indices=list(payload["poisoned_indices"]),
                   y_target=int(payload["y_target"]),
                   trigger=dict(payload["trigger"]),
                   original_labels=list(payload["original_labels"]))

    def save(self, path):
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))
