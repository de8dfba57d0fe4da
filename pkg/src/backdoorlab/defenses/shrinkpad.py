"""Test-time shrink-and-pad pre-processing.

Shrinking the image and re-placing it at a random offset inside a zero
canvas displaces location-sensitive trigger patterns, which usually breaks
them while leaving the semantic content recognizable. The model is treated
as a black box (forward passes only).
"""

import json
import os
import time

import numpy as np
import torch

from .. import metrics as metrics_mod
from ..imageops import resize_bilinear, to_float
from ..poison.transforms import sample_rng
from ..training.schedule import TestSchedule


def shrink_and_pad(img, pad, offset):
    """Resize a float image down by ``pad`` pixels per side and place it on
    a zero canvas at the given (row, col) offset."""
    h, w = img.shape[:2]
    if not 0 <= pad < min(h, w):
        raise ValueError(f"pad must lie in [0, {min(h, w)}), got {pad}")
    oy, ox = int(offset[0]), int(offset[1])
    if not (0 <= oy <= pad and 0 <= ox <= pad):
        raise ValueError(f"offset {offset} outside [0, {pad}]^2")
    if pad == 0:
        return img.copy()
    small = resize_bilinear(img, (h - pad, w - pad))
    canvas = np.zeros_like(img)
    canvas[oy:oy + h - pad, ox:ox + w - pad] = small
    return canvas


def shrinkpad_preprocess(image, size_map, pad, rng):
    """Pre-process one image with a fresh uniform offset from {0..pad}^2."""
    img = np.asarray(image)
    quantize = img.dtype == np.uint8
    if quantize:
        img = to_float(img)
    if img.shape[0] != size_map or img.shape[1] != size_map:
        raise ValueError(
            f"expected {size_map}x{size_map} input, got {img.shape[:2]}")
    offset = rng.integers(0, pad + 1, size=2) if pad > 0 else (0, 0)
    out = shrink_and_pad(img, pad, offset)
    if quantize:
        from ..imageops import to_uint8
        return to_uint8(out)
    return out


class ShrinkPad:
    """Pre-processing-based defense.

    Args:
        size_map: input side length; images must match.
        pad: shrink amount in pixels, 0 <= pad < size_map.
        seed: base seed for per-image offsets.
        deterministic: derive offsets from (seed, image index) so repeated
            calls reproduce the same placements.
    """

    def __init__(self, size_map, pad, seed=0, deterministic=False):
        if not 0 <= pad < size_map:
            raise ValueError(f"pad must lie in [0, {size_map}), got {pad}")
        self.size_map = int(size_map)
        self.pad = int(pad)
        self.seed = int(seed)
        self.deterministic = bool(deterministic)
        self._calls = 0

    def _rng(self, index):
        if self.deterministic:
            return sample_rng(self.seed, 0, index)
        return np.random.default_rng()

    def preprocess(self, images):
        """Pre-process one image (H x W x C) or a stack (N x H x W x C)."""
        arr = np.asarray(images)
        single = arr.ndim == 3 or (arr.ndim == 2)
        batch = arr[None] if single else arr
        out = []
        for i, img in enumerate(batch):
            out.append(shrinkpad_preprocess(img, self.size_map, self.pad,
                                            self._rng(self._calls + i)))
        self._calls += len(batch)
        return out[0] if single else np.stack(out)

    def predict(self, model, images, batch_size=128):
        """Argmax predictions of the model on pre-processed images."""
        processed = self.preprocess(images)
        if processed.ndim == 3:
            processed = processed[None]
        if processed.dtype == np.uint8:
            processed = to_float(processed)
        module = model.module
        module.eval()
        preds = []
        with torch.no_grad():
            for start in range(0, len(processed), batch_size):
                chunk = processed[start:start + batch_size].transpose(0, 3, 1, 2)
                logits = module(torch.from_numpy(np.ascontiguousarray(chunk)))
                preds.append(logits.argmax(dim=1).numpy())
        return np.concatenate(preds)

    def test(self, model, dataset, schedule):
        """Evaluate the schedule's metric with pre-processing applied."""
        if isinstance(schedule, dict):
            schedule = TestSchedule.from_dict(schedule)
        preds = []
        for start in range(0, len(dataset), schedule.batch_size):
            idx = range(start, min(start + schedule.batch_size, len(dataset)))
            imgs = np.stack([dataset[i][0] for i in idx])
            preds.append(self.predict(model, imgs, schedule.batch_size))
        preds = np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)
        labels = np.array([dataset.label_for(i) for i in range(len(dataset))])
        original = np.asarray(getattr(dataset, "original_labels", labels))
        report = metrics_mod.metric_from_predictions(
            schedule.metric, preds, labels, original, schedule.y_target)
        os.makedirs(schedule.run_dir, exist_ok=True)
        with open(os.path.join(schedule.run_dir, "metrics.json"), "w") as f:
            json.dump(report.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
        with open(os.path.join(schedule.run_dir, "log.txt"), "a") as f:
            f.write(f"[{time.strftime('%Y-%m-%d %H:%M:%S')}] "
                    f"{schedule.metric} = {report.value:.6f}\n")
        return report
