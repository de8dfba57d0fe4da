"""Training and testing schedules.

Schedules are accepted as plain dicts (or JSON documents) using the exact
key names from the reference configs, e.g.::

    {
        'device': 'CPU', 'CUDA_VISIBLE_DEVICES': '', 'GPU_num': 1,
        'benign_training': False, 'batch_size': 128, 'num_workers': 2,
        'lr': 0.1, 'momentum': 0.9, 'weight_decay': 5e-4,
        'gamma': 0.1, 'schedule': [150, 180], 'epochs': 200,
        'log_iteration_interval': 100, 'test_epoch_interval': 10,
        'save_epoch_interval': 20,
        'save_dir': 'experiments', 'experiment_name': 'demo',
    }

The inner ``schedule`` key holds the learning-rate milestone epochs.
"""

import json
import os
import warnings
from dataclasses import asdict, dataclass, field

import torch


@dataclass
class TrainSchedule:
    device: str = "CPU"
    device_selector: str = ""
    gpu_num: int = 1
    benign_training: bool = False
    batch_size: int = 128
    num_workers: int = 0
    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 5e-4
    gamma: float = 0.1
    milestones: list = field(default_factory=list)
    epochs: int = 1
    log_iteration_interval: int = 100
    test_epoch_interval: int = 10
    save_epoch_interval: int = 0
    save_dir: str = "experiments"
    experiment_name: str = "experiment"

    KEY_MAP = {
        "device": "device",
        "CUDA_VISIBLE_DEVICES": "device_selector",
        "GPU_num": "gpu_num",
        "benign_training": "benign_training",
        "batch_size": "batch_size",
        "num_workers": "num_workers",
        "lr": "lr",
        "momentum": "momentum",
        "weight_decay": "weight_decay",
        "gamma": "gamma",
        "schedule": "milestones",
        "epochs": "epochs",
        "log_iteration_interval": "log_iteration_interval",
        "test_epoch_interval": "test_epoch_interval",
        "save_epoch_interval": "save_epoch_interval",
        "save_dir": "save_dir",
        "experiment_name": "experiment_name",
    }

    @classmethod
    def from_dict(cls, config):
        unknown = set(config) - set(cls.KEY_MAP)
        if unknown:
            raise ValueError(f"unknown schedule keys: {sorted(unknown)}")
        kwargs = {cls.KEY_MAP[k]: v for k, v in config.items()}
        sched = cls(**kwargs)
        sched.validate()
        return sched

    @classmethod
    def from_json(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def to_dict(self):
        """Back to the external key names."""
        inverse = {v: k for k, v in self.KEY_MAP.items()}
        return {inverse[k]: v for k, v in asdict(self).items()}

    def validate(self):
        if self.device not in ("CPU", "GPU"):
            raise ValueError(f"device must be 'CPU' or 'GPU', got {self.device!r}")
        if self.gpu_num != 1:
            raise ValueError(f"GPU_num {self.gpu_num} unsupported; only 1 device")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.num_workers < 0:
            raise ValueError(f"num_workers must be >= 0, got {self.num_workers}")
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.momentum < 0 or self.weight_decay < 0:
            raise ValueError("momentum and weight_decay must be >= 0")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        ms = list(self.milestones)
        if any(m2 <= m1 for m1, m2 in zip(ms, ms[1:])):
            raise ValueError(f"milestones must be strictly increasing, got {ms}")
        if any(m >= self.epochs for m in ms):
            raise ValueError(f"milestones must be < epochs ({self.epochs}), got {ms}")
        for name in ("log_iteration_interval", "test_epoch_interval"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.save_epoch_interval < 0:
            raise ValueError("save_epoch_interval must be >= 0 (0 disables)")

    def lr_at(self, epoch):
        """Closed-form decay: lr * gamma^(#milestones <= epoch)."""
        decays = sum(1 for m in self.milestones if m <= epoch)
        return self.lr * self.gamma ** decays

    def resolve_device(self):
        """Pick the torch device, honoring the CUDA_VISIBLE_DEVICES mirror.

        A GPU request on a CUDA-less host falls back to CPU with a warning
        so reference configs stay runnable everywhere.
        """
        if self.device == "GPU":
            if self.device_selector:
                os.environ["CUDA_VISIBLE_DEVICES"] = str(self.device_selector)
            if torch.cuda.is_available():
                return torch.device("cuda")
            warnings.warn("schedule requests GPU but CUDA is unavailable; using CPU")
        return torch.device("cpu")

    @property
    def run_dir(self):
        return os.path.join(self.save_dir, self.experiment_name)


@dataclass
class TestSchedule:
    """Evaluation-only schedule: metric name plus loader settings."""

    metric: str = "BA"
    y_target: int = None
    device: str = "CPU"
    device_selector: str = ""
    gpu_num: int = 1
    batch_size: int = 128
    num_workers: int = 0
    save_dir: str = "experiments"
    experiment_name: str = "test"

    KEY_MAP = {
        "metric": "metric",
        "y_target": "y_target",
        "device": "device",
        "CUDA_VISIBLE_DEVICES": "device_selector",
        "GPU_num": "gpu_num",
        "batch_size": "batch_size",
        "num_workers": "num_workers",
        "save_dir": "save_dir",
        "experiment_name": "experiment_name",
    }

    @classmethod
    def from_dict(cls, config):
        unknown = set(config) - set(cls.KEY_MAP)
        if unknown:
            raise ValueError(f"unknown test schedule keys: {sorted(unknown)}")
        sched = cls(**{cls.KEY_MAP[k]: v for k, v in config.items()})
        if sched.gpu_num != 1:
            raise ValueError(f"GPU_num {sched.gpu_num} unsupported; only 1 device")
        return sched

    @property
    def run_dir(self):
        return os.path.join(self.save_dir, self.experiment_name)
