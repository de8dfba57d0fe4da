"""Schedule-driven training and evaluation.

The loop is plain momentum SGD with milestone learning-rate decay, periodic
iteration logging, periodic evaluation, and periodic checkpointing. The
human-readable ``log.txt`` carries wall-clock timestamps; the
machine-readable ``metrics.json`` deliberately does not, so deterministic
runs produce byte-identical metric files.
"""

import json
import os
import random
import time
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
from torch.utils.data import DataLoader, Dataset

from .. import metrics as metrics_mod
from .models import ModelHandle, build_model
from .schedule import TestSchedule, TrainSchedule


def set_deterministic(seed=0):
    """Seed every randomness source and disable nondeterministic kernels."""
    seed = int(seed)
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    if torch.cuda.is_available():
        torch.cuda.manual_seed_all(seed)
        torch.backends.cudnn.deterministic = True
        torch.backends.cudnn.benchmark = False
    torch.use_deterministic_algorithms(True)
    return seed


def build_loss(descriptor):
    """Loss from a descriptor string; callables pass through."""
    if callable(descriptor):
        return descriptor
    if descriptor in (None, "cross-entropy", "cross_entropy", "ce"):
        return nn.CrossEntropyLoss()
    raise ValueError(f"unknown loss descriptor {descriptor!r}")


class TorchImageDataset(Dataset):
    """Adapter from a DatasetHandle to torch (C x H x W float32, int64)."""

    def __init__(self, handle):
        self.handle = handle

    def __len__(self):
        return len(self.handle)

    def __getitem__(self, index):
        img, label = self.handle[index]
        tensor = torch.from_numpy(np.ascontiguousarray(img.transpose(2, 0, 1)))
        return tensor, label

    def set_epoch(self, epoch):
        self.handle.set_epoch(epoch)


@dataclass
class RunLog:
    """Append-only record of one training or evaluation run."""

    header: dict = field(default_factory=dict)
    iterations: list = field(default_factory=list)
    tests: list = field(default_factory=list)
    lr_trace: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)
    lines: list = field(default_factory=list)
    verbose: bool = False

    def say(self, msg):
        stamped = f"[{time.strftime('%Y-%m-%d %H:%M:%S')}] {msg}"
        self.lines.append(stamped)
        if self.verbose:
            print(stamped)

    def record_iteration(self, iteration, epoch, loss, lr):
        self.iterations.append({"iteration": int(iteration), "epoch": int(epoch),
                                "loss": float(loss), "lr": float(lr)})
        self.say(f"iter {iteration} epoch {epoch} loss {loss:.6f} lr {lr:g}")

    def record_test(self, epoch, metric, value):
        self.tests.append({"epoch": int(epoch), "metric": str(metric),
                           "value": float(value)})
        self.say(f"epoch {epoch} {metric} {value:.4f}")

    def to_dict(self):
        return {"header": self.header, "iterations": self.iterations,
                "tests": self.tests, "lr_trace": self.lr_trace,
                "checkpoints": self.checkpoints}

    def save(self, run_dir):
        os.makedirs(run_dir, exist_ok=True)
        with open(os.path.join(run_dir, "log.txt"), "w") as f:
            f.write("\n".join(self.lines) + "\n")
        with open(os.path.join(run_dir, "metrics.json"), "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")


def save_checkpoint(path, model: ModelHandle, schedule=None):
    """One-file checkpoint: descriptor JSON plus flat parameter arrays."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    meta = {
        "architecture": model.architecture,
        "num_classes": model.num_classes,
        "image_shape": list(model.image_shape),
        "extras": _encode_extras(model.extras),
        "schedule": schedule,
    }
    arrays = {f"param::{k}": v.detach().cpu().numpy()
              for k, v in model.module.state_dict().items()}
    np.savez(path, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
             **arrays)


def load_checkpoint(path):
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode())
        state = {k[len("param::"):]: torch.from_numpy(data[k].copy())
                 for k in data.files if k.startswith("param::")}
    handle = build_model(meta["architecture"], meta["num_classes"],
                         tuple(meta["image_shape"]))
    handle.module.load_state_dict(state)
    handle.module.eval()
    for layer, mask in _decode_extras(meta.get("extras", {})).get("prune_masks", {}).items():
        from ..defenses.prune import apply_channel_mask
        apply_channel_mask(handle, layer, np.asarray(mask))
    return handle


def _encode_extras(extras):
    out = {}
    for key, value in extras.items():
        if key == "prune_masks":
            out[key] = {layer: np.asarray(mask).tolist()
                        for layer, mask in value.items()}
        else:
            out[key] = value
    return out


def _decode_extras(extras):
    return extras or {}


def train(model: ModelHandle, dataset, loss, schedule, eval_sets=(),
          run_log=None, save_checkpoints=True):
    """Train a model on a dataset under a schedule.

    Args:
        model: handle whose module is trained in place.
        dataset: DatasetHandle (or poisoned view) to train on.
        loss: loss callable or descriptor string.
        schedule: TrainSchedule or schedule dict.
        eval_sets: iterable of (name, dataset, metric, y_target) evaluated
            every ``test_epoch_interval`` epochs and after the last epoch.
        run_log: existing RunLog to append to (a new one is created
            otherwise).
        save_checkpoints: write ckpt_epoch_N.npz under the run directory.

    Returns:
        (model, RunLog). With epochs == 0 the model is returned untouched
        and the log carries no iteration records.
    """
    if isinstance(schedule, dict):
        schedule = TrainSchedule.from_dict(schedule)
    schedule.validate()
    device = schedule.resolve_device()
    criterion = build_loss(loss)
    log = run_log if run_log is not None else RunLog()
    log.header.setdefault("schedule", schedule.to_dict())
    log.header.setdefault("architecture", model.architecture)

    if schedule.epochs == 0:
        return model, log

    module = model.module.to(device)
    optimizer = torch.optim.SGD(
        [p for p in module.parameters() if p.requires_grad],
        lr=schedule.lr, momentum=schedule.momentum,
        weight_decay=schedule.weight_decay)
    adapter = TorchImageDataset(dataset)
    loader = DataLoader(adapter, batch_size=schedule.batch_size, shuffle=True,
                        num_workers=schedule.num_workers, drop_last=False)

    iteration = 0
    for epoch in range(schedule.epochs):
        lr = schedule.lr_at(epoch)
        for group in optimizer.param_groups:
            group["lr"] = lr
        log.lr_trace.append(float(lr))
        adapter.set_epoch(epoch)
        module.train()
        for images, labels in loader:
            images = images.to(device)
            labels = labels.to(device)
            optimizer.zero_grad()
            outputs = module(images)
            batch_loss = criterion(outputs, labels)
            batch_loss.backward()
            optimizer.step()
            iteration += 1
            if iteration % schedule.log_iteration_interval == 0:
                log.record_iteration(iteration, epoch, batch_loss.item(), lr)

        last_epoch = epoch == schedule.epochs - 1
        if eval_sets and ((epoch + 1) % schedule.test_epoch_interval == 0 or last_epoch):
            module.eval()
            for name, eval_ds, metric, y_target in eval_sets:
                report = metrics_mod.evaluate_metric(model, eval_ds, metric,
                                                     y_target=y_target,
                                                     batch_size=schedule.batch_size,
                                                     device=device)
                log.record_test(epoch, f"{name}:{metric}", report.value)
        if save_checkpoints and schedule.save_epoch_interval and \
                (epoch + 1) % schedule.save_epoch_interval == 0:
            path = os.path.join(schedule.run_dir, f"ckpt_epoch_{epoch + 1}.npz")
            save_checkpoint(path, model, schedule.to_dict())
            log.checkpoints.append(path)
            log.say(f"saved checkpoint {path}")

    module.eval()
    log.save(schedule.run_dir)
    return model, log


def evaluate(model: ModelHandle, dataset, schedule):
    """Run one test schedule against a dataset and persist the report.

    ``schedule`` is a TestSchedule or dict carrying the metric name;
    ASR variants require ``y_target``.
    """
    if isinstance(schedule, dict):
        schedule = TestSchedule.from_dict(schedule)
    report = metrics_mod.evaluate_metric(model, dataset, schedule.metric,
                                         y_target=schedule.y_target,
                                         batch_size=schedule.batch_size)
    os.makedirs(schedule.run_dir, exist_ok=True)
    with open(os.path.join(schedule.run_dir, "metrics.json"), "w") as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    with open(os.path.join(schedule.run_dir, "log.txt"), "a") as f:
        f.write(f"[{time.strftime('%Y-%m-%d %H:%M:%S')}] "
                f"{schedule.metric} = {report.value:.6f} "
                f"(population {report.population})\n")
    return report
