"""Shared attack workflow.

Every attack binds benign datasets, a model, a loss, and a poisoning plan,
then follows the same sequence: build poisoned data, train under a given
schedule, expose the trained model and the poisoned datasets. Poison-only
attacks build their datasets eagerly at init; training-controlled attacks
gate dataset retrieval until after training, since their poisoned samples
depend on the training process.
"""

import torch.nn as nn

from ..poison.build import build_poisoned_dataset
from ..poison.data import DatasetHandle
from ..poison.plan import PoisonPlan
from ..training.harness import build_loss, set_deterministic, train
from ..training.models import ModelHandle, wrap_model
from ..training.schedule import TrainSchedule


class Attack:
    """Base attack session. Subclasses provide the trigger transform."""

    training_controlled = False

    def __init__(self, train_dataset, test_dataset, model, loss=None,
                 y_target=1, poisoned_rate=0.05,
                 poisoned_transform_train_index=None,
                 poisoned_transform_test_index=None,
                 exclude_target=False, seed=0, deterministic=False):
        self._check_datasets(train_dataset, test_dataset)
        self.benign_train = train_dataset
        self.benign_test = test_dataset
        self.model = self._wrap_model(model, train_dataset)
        self.loss = build_loss(loss)
        self.seed = int(seed)
        self.deterministic = bool(deterministic)
        self.plan = PoisonPlan.create(
            train_dataset, y_target=y_target, poisoned_rate=poisoned_rate,
            seed=seed, exclude_target=exclude_target,
            train_insert_index=poisoned_transform_train_index,
            test_insert_index=poisoned_transform_test_index,
            deterministic=deterministic)
        self.y_target = self.plan.y_target
        self.state = "initialized"
        self.run_log = None

        trigger_op, descriptor = self._build_trigger()
        self.poisoned_train, self.poisoned_test, self.manifest = \
            build_poisoned_dataset(self.benign_train, self.benign_test,
                                   self.plan, trigger_op, descriptor,
                                   test_trigger_op=self._build_test_trigger())
        self._poison_ready = not self.training_controlled

    # Subclass hook: return (trigger transform, manifest descriptor dict).
    def _build_trigger(self):
        raise NotImplementedError

    # Subclass hook: a different trigger for the test split (None = same).
    def _build_test_trigger(self):
        return None

    @staticmethod
    def _check_datasets(train_dataset, test_dataset):
        for name, ds in (("train", train_dataset), ("test", test_dataset)):
            if not isinstance(ds, DatasetHandle):
                raise ValueError(
                    f"dataset check failed: {name}_dataset is "
                    f"{type(ds).__name__}, expected DatasetHandle")
            if len(ds) == 0:
                raise ValueError(f"dataset check failed: {name}_dataset is empty")
        if train_dataset.image_shape != test_dataset.image_shape:
            raise ValueError(
                "dataset check failed: train/test image shapes differ "
                f"({train_dataset.image_shape} vs {test_dataset.image_shape})")
        if train_dataset.num_classes != test_dataset.num_classes:
            raise ValueError("dataset check failed: train/test class counts differ")

    @staticmethod
    def _wrap_model(model, dataset):
        if isinstance(model, ModelHandle):
            return model
        if isinstance(model, nn.Module):
            h, w, c = dataset.image_shape
            return wrap_model(model, dataset.num_classes, (c, h, w))
        raise ValueError(
            f"model must be a ModelHandle or nn.Module, got {type(model).__name__}")

    def get_poisoned_dataset(self):
        """Poisoned (train, test) splits.

        For training-controlled attacks this is valid only after training.
        """
        if not self._poison_ready:
            raise RuntimeError(
                f"{type(self).__name__} is training-controlled: call train() "
                "before get_poisoned_dataset()")
        return self.poisoned_train, self.poisoned_test

    def get_manifest(self):
        return self.manifest

    def train(self, schedule):
        """Run the attack's training stage under the given schedule.

        With ``benign_training`` set in the schedule, the model trains on
        the benign split instead (baseline mode).
        """
        if isinstance(schedule, dict):
            schedule = TrainSchedule.from_dict(schedule)
        if self.deterministic:
            set_deterministic(self.seed)
        dataset = self.benign_train if schedule.benign_training else self.poisoned_train
        eval_sets = [
            ("benign", self.benign_test, "BA", None),
            ("poisoned", self.poisoned_test, "ASR_NoTarget", self.y_target),
        ]
        _, self.run_log = train(self.model, dataset, self.loss, schedule,
                                eval_sets=eval_sets)
        self.state = "trained"
        self._poison_ready = True
        return self.run_log

    def get_model(self):
        """Snapshot of the attacked model; immutable under further training."""
        if self.state != "trained":
            raise RuntimeError("model not trained yet: call train() first")
        return self.model.snapshot()
