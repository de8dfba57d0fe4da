"""Sample diagnosis by spectral outlier scoring.

Poisoned samples leave a detectable trace in feature space: within their
labeled class they align with the top singular direction of the centered
feature matrix. Each sample is scored by its squared projection onto that
direction, and the high-score tail of every class gets flagged.
"""

import json
import os
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import torch

from ..metrics import filter_precision_recall
from ..training.models import ModelHandle
from ..training.schedule import TestSchedule


@dataclass
class FilterVerdict:
    """Per-sample outlier scores plus the flagged index set."""

    scores: np.ndarray
    flagged: list
    percentile: float
    skipped_classes: list = field(default_factory=list)

    def to_dict(self):
        return {"scores": [float(s) for s in self.scores],
                "flagged": [int(i) for i in self.flagged],
                "percentile": float(self.percentile)}

    def save(self, path):
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")


def extract_features(model: ModelHandle, dataset, feature_layer=None,
                     batch_size=128):
    """Per-sample feature vectors from a named layer.

    With ``feature_layer=None`` the penultimate representation is used (the
    input of the model's ``classifier`` module). Otherwise the named
    module's output is captured and flattened.
    """
    modules = dict(model.module.named_modules())
    captured = []

    if feature_layer is None:
        if "classifier" not in modules:
            raise ValueError(
                "model has no 'classifier' module; pass feature_layer "
                f"explicitly (layers: {[n for n in modules if n]})")

        def hook(_mod, inputs, _output):
            captured.append(inputs[0].detach().flatten(1).cpu().numpy())

        handle = modules["classifier"].register_forward_hook(hook)
    else:
        if feature_layer not in modules or feature_layer == "":
            raise ValueError(
                f"unknown layer {feature_layer!r}; "
                f"model layers: {[n for n in modules if n]}")

        def hook(_mod, _inputs, output):
            captured.append(output.detach().flatten(1).cpu().numpy())

        handle = modules[feature_layer].register_forward_hook(hook)

    try:
        model.module.eval()
        with torch.no_grad():
            for start in range(0, len(dataset), batch_size):
                idx = range(start, min(start + batch_size, len(dataset)))
                imgs = np.stack([dataset[i][0].transpose(2, 0, 1) for i in idx])
                model.module(torch.from_numpy(np.ascontiguousarray(imgs)))
    finally:
        handle.remove()
    return np.concatenate(captured, axis=0)


def spectral_scores(features, labels, num_classes, percentile=80.0):
    """Score and flag per-class spectral outliers.

    Per class: center the feature matrix, take the top right singular
    vector v, score each sample by its squared projection onto v, and flag
    scores strictly above the class's percentile threshold. Classes with
    fewer than two samples are skipped with a warning.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if not 0.0 <= percentile <= 100.0:
        raise ValueError(f"percentile must lie in [0, 100], got {percentile}")
    scores = np.zeros(len(features))
    flagged = []
    skipped = []
    for k in range(num_classes):
        members = np.flatnonzero(labels == k)
        if len(members) < 2:
            if len(members):
                skipped.append(int(k))
                warnings.warn(f"class {k} has fewer than 2 samples; skipped")
            continue
        centered = features[members] - features[members].mean(axis=0)
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        proj = centered @ vt[0]
        class_scores = proj ** 2
        scores[members] = class_scores
        threshold = np.percentile(class_scores, percentile)
        flagged.extend(int(i) for i in members[class_scores > threshold])
    return FilterVerdict(scores=scores, flagged=sorted(flagged),
                         percentile=float(percentile),
                         skipped_classes=skipped)


def spectral_filter(model, dataset, feature_layer=None, percentile=80.0,
                    batch_size=128):
    """Run the full filter: features, per-class scoring, flagging."""
    features = extract_features(model, dataset, feature_layer, batch_size)
    labels = np.array([dataset.label_for(i) for i in range(len(dataset))])
    return spectral_scores(features, labels, dataset.num_classes, percentile)


def filter_test(verdict: FilterVerdict, ground_truth_indices):
    """Detection precision/recall against the manifest ground truth."""
    return filter_precision_recall(verdict.flagged, ground_truth_indices)


class SpectralSignature:
    """Sample-diagnosis defense for a model trained on the suspicious set."""

    def __init__(self, model, dataset, percentile=80, feature_layer=None,
                 seed=0, deterministic=False):
        if not isinstance(model, ModelHandle):
            raise ValueError("model must be a ModelHandle")
        self.model = model
        self.dataset = dataset
        self.percentile = float(percentile)
        self.feature_layer = feature_layer
        self.verdict = None

    def filter(self, batch_size=128):
        """Returns (flagged indices, per-sample scores)."""
        self.verdict = spectral_filter(self.model, self.dataset,
                                       self.feature_layer, self.percentile,
                                       batch_size)
        return self.verdict.flagged, self.verdict.scores

    def test(self, ground_truth_indices, schedule):
        """Evaluate detection quality under a test schedule."""
        if self.verdict is None:
            self.filter()
        if isinstance(schedule, dict):
            schedule = TestSchedule.from_dict(schedule)
        precision, recall = filter_test(self.verdict, ground_truth_indices)
        if schedule.metric == "Precision":
            report = precision
        elif schedule.metric == "Recall":
            report = recall
        else:
            raise ValueError(
                f"metric {schedule.metric!r} unsupported for sample "
                "diagnosis; use 'Precision' or 'Recall'")
        os.makedirs(schedule.run_dir, exist_ok=True)
        with open(os.path.join(schedule.run_dir, "metrics.json"), "w") as f:
            json.dump(report.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
        with open(os.path.join(schedule.run_dir, "log.txt"), "a") as f:
            f.write(f"[{time.strftime('%Y-%m-%d %H:%M:%S')}] "
                    f"{schedule.metric} = {report.value:.6f}\n")
        self.verdict.save(os.path.join(schedule.run_dir, "verdict.json"))
        return report
