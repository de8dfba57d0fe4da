"""Evaluation metrics.

Accepted metric names are the exact strings used in test schedules:
``BA``, ``ASR``, ``ASR_NoTarget``, ``Precision``, ``Recall``. BA is
accuracy against ground-truth labels; the ASR variants measure how often
triggered samples land on the target class, with ``ASR_NoTarget``
restricted to samples whose original label differs from the target.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import torch

MODEL_METRICS = ("BA", "ASR", "ASR_NoTarget")
FILTER_METRICS = ("Precision", "Recall")
SUPPORTED_METRICS = MODEL_METRICS + FILTER_METRICS


@dataclass
class EvalReport:
    metric: str
    value: float
    population: int
    per_class: dict = field(default_factory=dict)
    y_target: int = None
    empty_population: bool = False

    def to_dict(self):
        return {
            "metric": self.metric,
            "value": float(self.value),
            "population": int(self.population),
            "per_class": {str(k): v for k, v in self.per_class.items()},
            "y_target": self.y_target,
            "empty_population": self.empty_population,
        }


def predict_labels(model, dataset, batch_size=128, device=None):
    """Argmax model predictions over a dataset, in dataset order."""
    module = model.module
    device = device or next(module.parameters()).device
    module.eval()
    preds = []
    with torch.no_grad():
        batch = []
        for i in range(len(dataset)):
            img, _ = dataset[i]
            batch.append(img.transpose(2, 0, 1))
            if len(batch) == batch_size or i == len(dataset) - 1:
                tensors = torch.from_numpy(np.ascontiguousarray(np.stack(batch)))
                logits = module(tensors.to(device))
                preds.append(logits.argmax(dim=1).cpu().numpy())
                batch = []
    return np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)


def _breakdown(keys, hits):
    out = {}
    for k in np.unique(keys):
        mask = keys == k
        out[int(k)] = {"value": float(hits[mask].mean()), "count": int(mask.sum())}
    return out


def metric_from_predictions(metric, preds, labels, original_labels=None,
                            y_target=None):
    """Score already-computed predictions; the metric dispatch core."""
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if metric == "BA":
        if len(preds) == 0:
            return EvalReport("BA", 0.0, 0, empty_population=True)
        hits = preds == labels
        return EvalReport("BA", float(hits.mean()), len(preds),
                          per_class=_breakdown(labels, hits))
    if metric in ("ASR", "ASR_NoTarget"):
        if y_target is None:
            raise ValueError("attack success rate requires y_target")
        original = labels if original_labels is None else np.asarray(original_labels)
        keep = np.ones(len(preds), dtype=bool) if metric == "ASR" \
            else original != y_target
        if not keep.any():
            return EvalReport(metric, 0.0, 0, y_target=int(y_target),
                              empty_population=True)
        hits = preds[keep] == y_target
        return EvalReport(metric, float(hits.mean()), int(keep.sum()),
                          per_class=_breakdown(original[keep], hits),
                          y_target=int(y_target))
    raise ValueError(
        f"unknown metric {metric!r}; supported: {list(SUPPORTED_METRICS)}")


def _dataset_labels(dataset):
    labels = np.array([dataset.label_for(i) for i in range(len(dataset))])
    original = np.asarray(getattr(dataset, "original_labels", labels))
    return labels, original


def benign_accuracy(model, dataset, batch_size=128, device=None):
    """Fraction of argmax predictions matching ground-truth labels."""
    if len(dataset) == 0:
        return EvalReport("BA", 0.0, 0, empty_population=True)
    preds = predict_labels(model, dataset, batch_size, device)
    labels, _ = _dataset_labels(dataset)
    return metric_from_predictions("BA", preds, labels)


def attack_success_rate(model, poisoned_test, y_target, mode="NoTarget",
                        batch_size=128, device=None):
    """Fraction of triggered samples predicted as the target class.

    ``mode='ALL'`` scores every sample; ``mode='NoTarget'`` restricts to
    samples whose original label differs from the target. Datasets built by
    the poisoning pipeline expose ``original_labels``; plain datasets fall
    back to their stored labels.
    """
    if mode not in ("ALL", "NoTarget"):
        raise ValueError(f"mode must be 'ALL' or 'NoTarget', got {mode!r}")
    metric = "ASR" if mode == "ALL" else "ASR_NoTarget"
    if y_target is None:
        raise ValueError("attack success rate requires y_target")
    if len(poisoned_test) == 0:
        return EvalReport(metric, 0.0, 0, y_target=int(y_target),
                          empty_population=True)
    preds = predict_labels(model, poisoned_test, batch_size, device)
    labels, original = _dataset_labels(poisoned_test)
    return metric_from_predictions(metric, preds, labels, original, y_target)


def filter_precision_recall(flagged, truth):
    """Precision and recall of a flagged index set against ground truth."""
    flagged = set(int(i) for i in flagged)
    truth = set(int(i) for i in truth)
    hit = len(flagged & truth)
    if not flagged:
        warnings.warn("empty flagged set; precision defined as 0")
        precision = 0.0
    else:
        precision = hit / len(flagged)
    recall = hit / len(truth) if truth else 0.0
    return (EvalReport("Precision", precision, len(flagged),
                       empty_population=not flagged),
            EvalReport("Recall", recall, len(truth),
                       empty_population=not truth))


def evaluate_metric(model, dataset, metric, y_target=None, batch_size=128,
                    device=None):
    """Dispatch a model-based metric by its schedule name."""
    if metric == "BA":
        return benign_accuracy(model, dataset, batch_size, device)
    if metric in ("ASR", "ASR_NoTarget"):
        mode = "ALL" if metric == "ASR" else "NoTarget"
        return attack_success_rate(model, dataset, y_target, mode,
                                   batch_size, device)
    raise ValueError(
        f"unknown metric {metric!r}; supported: {list(SUPPORTED_METRICS)}")
