"""Poison suppression by cut-and-mix training from scratch.

Pasting random boxes between training images and mixing the label loss by
the surviving area dilutes the association between a localized trigger and
the target label while the model trains on the suspicious data.
"""

import math

import numpy as np
import torch
from torch.utils.data import DataLoader

from ..training.harness import (RunLog, TorchImageDataset, build_loss,
                                evaluate, set_deterministic)
from ..training.models import ModelHandle
from ..training.schedule import TrainSchedule


def rand_bbox(image_size, lam, rng):
    """Random box covering an area ratio of (1 - lam), clipped to bounds.

    Args:
        image_size: (H, W).
        lam: area-keep ratio in [0, 1]; the box side ratio is sqrt(1 - lam)
            per dimension.
        rng: numpy Generator for the center draw.

    Returns:
        (x1, y1, x2, y2, lam_adj) with lam_adj = 1 - clipped box area over
        image area.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lam must lie in [0, 1], got {lam}")
    h, w = image_size
    cut_rat = math.sqrt(1.0 - lam)
    cut_w = int(w * cut_rat)
    cut_h = int(h * cut_rat)
    cx = int(rng.integers(w))
    cy = int(rng.integers(h))
    x1 = int(np.clip(cx - cut_w // 2, 0, w))
    y1 = int(np.clip(cy - cut_h // 2, 0, h))
    x2 = int(np.clip(cx + cut_w // 2, 0, w))
    y2 = int(np.clip(cy + cut_h // 2, 0, h))
    lam_adj = 1.0 - ((x2 - x1) * (y2 - y1)) / float(w * h)
    return x1, y1, x2, y2, lam_adj


def cutmix_batch(images, labels, beta, rng):
    """Mix one batch in place against a shuffled partner batch.

    Args:
        images: N x C x H x W tensor (modified in place).
        labels: N tensor.
        beta: Beta-distribution shape for the lam draw.
        rng: numpy Generator.

    Returns:
        (labels_a, labels_b, lam_adj): original labels, partner labels, and
        the area-corrected mixing weight.
    """
    lam = float(rng.beta(beta, beta))
    perm = torch.from_numpy(rng.permutation(len(images)))
    labels_a = labels
    labels_b = labels[perm]
    h, w = images.shape[2], images.shape[3]
    x1, y1, x2, y2, lam_adj = rand_bbox((h, w), lam, rng)
    images[:, :, y1:y2, x1:x2] = images[perm][:, :, y1:y2, x1:x2]
    return labels_a, labels_b, lam_adj


class CutMix:
    """Poison-suppression defense: train from scratch with cut-and-mix.

    Args:
        model: handle to train (trained in place, like the attack engine).
        loss: loss callable or descriptor.
        beta: Beta-distribution shape, > 0.
        cutmix_prob: per-batch probability of applying the mix.
    """

    def __init__(self, model, loss=None, beta=1.0, cutmix_prob=1.0, seed=0,
                 deterministic=False):
        if not isinstance(model, ModelHandle):
            raise ValueError("model must be a ModelHandle")
        if beta <= 0:
            raise ValueError(f"beta must be > 0, got {beta}")
        if not 0.0 <= cutmix_prob <= 1.0:
            raise ValueError(f"cutmix_prob must lie in [0, 1], got {cutmix_prob}")
        self.model = model
        self.loss = build_loss(loss)
        self.beta = float(beta)
        self.cutmix_prob = float(cutmix_prob)
        self.seed = int(seed)
        self.deterministic = bool(deterministic)
        self.state = "initialized"
        self.run_log = None

    def train(self, trainset, schedule):
        """Train on the (suspicious) dataset with per-batch mixing."""
        if isinstance(schedule, dict):
            schedule = TrainSchedule.from_dict(schedule)
        schedule.validate()
        if self.deterministic:
            set_deterministic(self.seed)
        device = schedule.resolve_device()
        rng = np.random.default_rng(self.seed)
        log = RunLog()
        log.header["schedule"] = schedule.to_dict()
        log.header["defense"] = {"beta": self.beta,
                                 "cutmix_prob": self.cutmix_prob}

        module = self.model.module.to(device)
        optimizer = torch.optim.SGD(module.parameters(), lr=schedule.lr,
                                    momentum=schedule.momentum,
                                    weight_decay=schedule.weight_decay)
        adapter = TorchImageDataset(trainset)
        loader = DataLoader(adapter, batch_size=schedule.batch_size,
                            shuffle=True, num_workers=schedule.num_workers)

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
                if rng.random() < self.cutmix_prob:
                    labels_a, labels_b, lam_adj = cutmix_batch(
                        images, labels, self.beta, rng)
                    outputs = module(images)
                    batch_loss = (lam_adj * self.loss(outputs, labels_a)
                                  + (1.0 - lam_adj) * self.loss(outputs, labels_b))
                else:
                    outputs = module(images)
                    batch_loss = self.loss(outputs, labels)
                batch_loss.backward()
                optimizer.step()
                iteration += 1
                if iteration % schedule.log_iteration_interval == 0:
                    log.record_iteration(iteration, epoch, batch_loss.item(), lr)

        module.eval()
        log.save(schedule.run_dir)
        self.state = "trained"
        self.run_log = log
        return log

    def get_model(self):
        if self.state != "trained":
            raise RuntimeError("model not trained yet: call train() first")
        return self.model.snapshot()

    def test(self, dataset, schedule):
        return evaluate(self.model, dataset, schedule)
