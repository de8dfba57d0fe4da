"""Config-driven experiment orchestration.

An experiment manifest is a JSON document naming a dataset, an optional
attack, an ordered list of defenses, and the schedules to train and score
with. ``validate`` checks the document and its stage dependencies without
computing anything; ``run`` executes the stages in order (poison, train,
defenses, tests) and persists every artifact under
``output_dir/experiment_name/``:

    log.txt  metrics.json  summary.json  manifest.lock.json
    checkpoints/  poisoned_data/  reports/

Reruns of the lockfile in deterministic mode reproduce summary.json
byte-identically.
"""

import json
import os
import traceback

import numpy as np

from . import __version__
from .attacks import ATTACKS
from .defenses import (CutMix, FineTuning, Pruning, ShrinkPad,
                       SpectralSignature)
from .metrics import SUPPORTED_METRICS
from .poison.build import export_poisoned_dataset
from .poison.data import (load_cifar10_like, load_folder, load_mnist_like,
                          write_json)
from .synthetic import make_classification_data
from .training.harness import load_checkpoint, save_checkpoint, set_deterministic
from .training.models import build_model
from .training.schedule import TestSchedule, TrainSchedule

DATASET_KINDS = ("synthetic-digits", "folder", "mnist-idx", "cifar10-batches")
DEFENSE_METHODS = ("ShrinkPad", "FineTuning", "Pruning", "CutMix",
                   "SpectralSignature")
MODEL_DEFENSES = ("ShrinkPad", "FineTuning", "Pruning", "SpectralSignature")

DEFAULT_TRAIN_SCHEDULE = {
    "device": "CPU", "CUDA_VISIBLE_DEVICES": "", "GPU_num": 1,
    "benign_training": False, "batch_size": 128, "num_workers": 0,
    "lr": 0.1, "momentum": 0.9, "weight_decay": 5e-4,
    "gamma": 0.1, "schedule": [], "epochs": 5,
    "log_iteration_interval": 100, "test_epoch_interval": 10,
    "save_epoch_interval": 0,
    "save_dir": "experiments", "experiment_name": "experiment",
}

DEFAULT_REPAIR_SCHEDULE = {
    "batch_size": 128, "lr": 0.001, "momentum": 0.9, "weight_decay": 5e-4,
    "gamma": 0.1, "schedule": [], "epochs": 10,
    "log_iteration_interval": 100,
}


def load_manifest(path):
    with open(path) as f:
        return json.load(f)


def resolve_manifest(manifest, overrides=None):
    """Fill defaults and apply CLI overrides; returns the lock dict."""
    resolved = {
        "dataset": dict(manifest.get("dataset")
                        or {"kind": "synthetic-digits",
                            "num_train": 2000, "num_test": 500}),
        "model": dict(manifest.get("model") or {"architecture": "small-cnn"}),
        "attack": dict(manifest["attack"]) if manifest.get("attack") else None,
        "checkpoint": manifest.get("checkpoint"),
        "defenses": [dict(d) for d in manifest.get("defenses", [])],
        "train_schedule": {**DEFAULT_TRAIN_SCHEDULE,
                           **(manifest.get("train_schedule") or {})},
        "test_schedules": [dict(t) for t in manifest.get("test_schedules", [])],
        "seed": int(manifest.get("seed", 0)),
        "deterministic": bool(manifest.get("deterministic", True)),
        "output_dir": manifest.get("output_dir", "runs"),
        "experiment_name": manifest.get("experiment_name", "experiment"),
    }
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "device":
            resolved["train_schedule"]["device"] = value
        else:
            resolved[key] = value
    if resolved["attack"] is not None:
        atk = resolved["attack"]
        atk.setdefault("kind", "BadNets")
        atk.setdefault("y_target", 1)
        atk.setdefault("poisoned_rate", 0.05)
        atk.setdefault("trigger", {})
    sched = resolved["train_schedule"]
    sched["save_dir"] = resolved["output_dir"]
    sched["experiment_name"] = resolved["experiment_name"]
    return resolved


def validate_manifest(manifest):
    """Full schema and stage-dependency check; returns a findings list."""
    findings = []
    m = resolve_manifest(manifest)

    if m["dataset"].get("kind") not in DATASET_KINDS:
        findings.append(f"unknown dataset kind {m['dataset'].get('kind')!r}; "
                        f"supported: {list(DATASET_KINDS)}")
    elif m["dataset"]["kind"] != "synthetic-digits":
        path = m["dataset"].get("path")
        if not path:
            findings.append(f"dataset kind {m['dataset']['kind']} requires a path")
        elif not os.path.exists(path):
            findings.append(f"dataset path {path} does not exist")

    if m["attack"] is None and not m["defenses"]:
        findings.append("manifest needs an attack stage, defenses, or both")

    if m["attack"] is not None and m["attack"]["kind"] not in ATTACKS:
        findings.append(f"unknown attack kind {m['attack']['kind']!r}; "
                        f"supported: {sorted(ATTACKS)}")

    if m["checkpoint"] and not os.path.exists(m["checkpoint"]):
        findings.append(f"checkpoint {m['checkpoint']} does not exist")

    has_model_source = m["attack"] is not None or m["checkpoint"]
    for d in m["defenses"]:
        method = d.get("method")
        params = d.get("params", {})
        if method not in DEFENSE_METHODS:
            findings.append(f"unknown defense method {method!r}; "
                            f"supported: {list(DEFENSE_METHODS)}")
            continue
        if method in MODEL_DEFENSES and not has_model_source:
            findings.append(f"defense {method} requires a trained model: add "
                            "an attack stage or a checkpoint reference")
        if method == "SpectralSignature" and m["attack"] is None:
            findings.append("SpectralSignature needs an attack stage for the "
                            "suspicious dataset and its ground truth")
        if method == "ShrinkPad":
            size_map = params.get("size_map")
            pad = params.get("pad", 4)
            if size_map is not None and pad >= size_map:
                findings.append(f"ShrinkPad pad {pad} must be < size_map {size_map}")
        if method == "Pruning":
            frac = params.get("prune_fraction", 0.2)
            if not 0.0 <= frac <= 1.0:
                findings.append(f"Pruning prune_fraction {frac} outside [0, 1]")

    for t in m["test_schedules"]:
        metric = t.get("metric")
        if metric not in SUPPORTED_METRICS:
            findings.append(f"unknown metric {metric!r}; "
                            f"supported: {list(SUPPORTED_METRICS)}")
            continue
        if metric in ("ASR", "ASR_NoTarget"):
            y_target = t.get("y_target",
                             m["attack"]["y_target"] if m["attack"] else None)
            if y_target is None:
                findings.append(f"metric {metric} requires y_target")
            if m["attack"] is None:
                findings.append(f"metric {metric} requires an attack stage "
                                "(no poisoned test split otherwise)")
        if metric in ("Precision", "Recall") and m["attack"] is None:
            findings.append(f"metric {metric} requires an attack stage for "
                            "ground truth")

    try:
        TrainSchedule.from_dict(m["train_schedule"])
    except ValueError as err:
        findings.append(f"train_schedule: {err}")
    return findings


def load_dataset(spec, seed=0):
    kind = spec["kind"]
    if kind == "synthetic-digits":
        return make_classification_data(
            num_train=int(spec.get("num_train", 2000)),
            num_test=int(spec.get("num_test", 500)),
            image_size=tuple(spec.get("image_size", (28, 28))),
            channels=int(spec.get("channels", 1)),
            num_classes=int(spec.get("num_classes", 10)),
            seed=int(spec.get("seed", seed)))
    path = spec["path"]
    if kind == "folder":
        test_path = spec.get("test_path", path)
        return load_folder(path, "train"), load_folder(test_path, "test")
    if kind == "mnist-idx":
        return load_mnist_like(path, "train"), load_mnist_like(path, "test")
    if kind == "cifar10-batches":
        return load_cifar10_like(path, "train"), load_cifar10_like(path, "test")
    raise ValueError(f"unknown dataset kind {kind!r}")


def _build_trigger_kwargs(kind, trigger_cfg, image_shape, seed):
    from .poison.triggers import corner_patch
    cfg = dict(trigger_cfg or {})
    if kind in ("BadNets", "PhysicalBA"):
        patch = corner_patch(image_shape,
                             patch_size=int(cfg.get("patch_size", 3)),
                             value=float(cfg.get("value", 255)))
        return {"pattern": patch.pattern, "weight": patch.weight}
    if kind == "Blended":
        h, w = image_shape[:2]
        pattern = cfg.get("pattern")
        if pattern is None or pattern == "noise":
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=seed, spawn_key=(31,)))
            pattern = rng.integers(0, 256, size=(h, w)).astype(np.float32)
        return {"pattern": np.asarray(pattern, dtype=np.float32),
                "weight": float(cfg.get("alpha", 0.1))}
    if kind == "WaNet":
        return {"grid_size": int(cfg.get("grid_size", 4)),
                "strength": float(cfg.get("strength", 0.5))}
    raise ValueError(f"unknown attack kind {kind!r}")


def build_attack(resolved, benign_train, benign_test, model):
    atk = resolved["attack"]
    kind = atk["kind"]
    kwargs = _build_trigger_kwargs(kind, atk.get("trigger"),
                                   benign_train.image_shape, resolved["seed"])
    return ATTACKS[kind](
        train_dataset=benign_train, test_dataset=benign_test, model=model,
        y_target=int(atk["y_target"]),
        poisoned_rate=float(atk["poisoned_rate"]),
        poisoned_transform_train_index=atk.get("poisoned_transform_train_index"),
        poisoned_transform_test_index=atk.get("poisoned_transform_test_index"),
        seed=resolved["seed"], deterministic=resolved["deterministic"],
        **kwargs)


def _benign_subset(benign_train, fraction, seed):
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(101,)))
    count = max(1, int(np.floor(fraction * len(benign_train))))
    indices = np.sort(rng.permutation(len(benign_train))[:count])
    return benign_train.subset(indices)


def _report_entry(stage, report):
    entry = report.to_dict()
    entry["stage"] = stage
    return entry


class ExperimentRunner:
    """Executes one resolved manifest, stage by stage."""

    def __init__(self, resolved, verbose=False):
        self.m = resolved
        self.verbose = verbose
        self.run_dir = os.path.join(resolved["output_dir"],
                                    resolved["experiment_name"])
        self.reports = []
        self.model = None
        self.attack = None
        self.benign_train = None
        self.benign_test = None

    def _say(self, msg):
        if self.verbose:
            print(msg)

    def _test_schedule(self, stage, cfg):
        cfg = dict(cfg)
        metric = cfg["metric"]
        if metric in ("ASR", "ASR_NoTarget") and "y_target" not in cfg \
                and self.m["attack"]:
            cfg["y_target"] = self.m["attack"]["y_target"]
        cfg["save_dir"] = os.path.join(self.run_dir, "reports")
        cfg["experiment_name"] = f"{stage}_{metric}".replace(":", "-")
        return TestSchedule.from_dict(cfg)

    def _dataset_for_metric(self, metric):
        if metric == "BA":
            return self.benign_test
        if self.attack is None:
            return None
        return self.attack.poisoned_test

    def _evaluate_stage(self, stage, model, preprocess_defense=None,
                        verdict_source=None):
        from .training.harness import evaluate
        for cfg in self.m["test_schedules"]:
            metric = cfg["metric"]
            schedule = self._test_schedule(stage, cfg)
            if metric in ("Precision", "Recall"):
                if verdict_source is None:
                    continue
                report = verdict_source.test(
                    self.attack.manifest.poisoned_indices, schedule)
            else:
                if verdict_source is not None:
                    continue
                dataset = self._dataset_for_metric(metric)
                if dataset is None:
                    continue
                if preprocess_defense is not None:
                    report = preprocess_defense.test(model, dataset, schedule)
                else:
                    report = evaluate(model, dataset, schedule)
            self.reports.append(_report_entry(stage, report))
            self._say(f"  {stage} {metric} = {report.value:.4f}")

    # Stages -----------------------------------------------------------

    def stage_data(self):
        self._say("loading dataset")
        self.benign_train, self.benign_test = load_dataset(
            self.m["dataset"], self.m["seed"])

    def stage_model(self):
        shape = self.benign_train.image_shape
        if self.m["checkpoint"]:
            self._say(f"loading checkpoint {self.m['checkpoint']}")
            self.model = load_checkpoint(self.m["checkpoint"])
        else:
            arch = self.m["model"]["architecture"]
            self.model = build_model(arch, self.benign_train.num_classes,
                                     (shape[2], shape[0], shape[1]))

    def stage_attack(self):
        if self.m["attack"] is None:
            return
        self._say(f"attack: {self.m['attack']['kind']}")
        self.attack = build_attack(self.m, self.benign_train,
                                   self.benign_test, self.model)
        if not self.m["checkpoint"]:
            self.attack.train(dict(self.m["train_schedule"]))
            ckpt = os.path.join(self.run_dir, "checkpoints", "attacked_model.npz")
            save_checkpoint(ckpt, self.model, self.m["train_schedule"])
        else:
            # Model came from a checkpoint: reuse it, skip training.
            self.attack.model = self.model
            self.attack.state = "trained"
            self.attack._poison_ready = True
        export_poisoned_dataset(self.attack.poisoned_train,
                                self.attack.manifest,
                                os.path.join(self.run_dir, "poisoned_data"))
        self._evaluate_stage("attack", self.model)

    def stage_defenses(self):
        for d in self.m["defenses"]:
            method = d["method"]
            params = dict(d.get("params", {}))
            stage = f"defense:{method}"
            self._say(stage)
            if method == "ShrinkPad":
                size_map = int(params.get("size_map",
                                          self.benign_train.image_shape[0]))
                defense = ShrinkPad(size_map=size_map,
                                    pad=int(params.get("pad", 4)),
                                    seed=self.m["seed"],
                                    deterministic=self.m["deterministic"])
                self._evaluate_stage(stage, self.model,
                                     preprocess_defense=defense)
            elif method == "FineTuning":
                benign = _benign_subset(self.benign_train,
                                        float(params.get("benign_fraction", 0.1)),
                                        self.m["seed"])
                schedule = {**DEFAULT_REPAIR_SCHEDULE,
                            **params.get("schedule", {}),
                            "save_dir": os.path.join(self.run_dir, "reports"),
                            "experiment_name": "finetuning"}
                defense = FineTuning(benign, self.benign_test, self.model,
                                     layer=params.get("layer"))
                defense.repair(schedule)
                self._evaluate_stage(stage, defense.repaired)
            elif method == "Pruning":
                benign = _benign_subset(self.benign_train,
                                        float(params.get("benign_fraction", 0.1)),
                                        self.m["seed"])
                defense = Pruning(benign, self.benign_test, self.model,
                                  layer=params.get("layer", "conv2"),
                                  prune_rate=float(params.get("prune_fraction", 0.2)))
                defense.repair()
                self._evaluate_stage(stage, defense.repaired)
            elif method == "CutMix":
                shape = self.benign_train.image_shape
                fresh = build_model(self.m["model"]["architecture"],
                                    self.benign_train.num_classes,
                                    (shape[2], shape[0], shape[1]))
                defense = CutMix(fresh, beta=float(params.get("beta", 1.0)),
                                 cutmix_prob=float(params.get("cutmix_prob", 1.0)),
                                 seed=self.m["seed"],
                                 deterministic=self.m["deterministic"])
                schedule = {**self.m["train_schedule"],
                            **params.get("schedule", {}),
                            "save_dir": os.path.join(self.run_dir, "reports"),
                            "experiment_name": "cutmix"}
                trainset = (self.attack.poisoned_train if self.attack
                            else self.benign_train)
                defense.train(trainset, schedule)
                self._evaluate_stage(stage, defense.model)
            elif method == "SpectralSignature":
                defense = SpectralSignature(
                    self.model, self.attack.poisoned_train,
                    percentile=float(params.get("percentile", 80)),
                    feature_layer=params.get("feature_layer"))
                defense.filter()
                self._evaluate_stage(stage, self.model, verdict_source=defense)
            else:
                raise ValueError(f"unknown defense method {method!r}")

    def run(self):
        os.makedirs(self.run_dir, exist_ok=True)
        if self.m["deterministic"]:
            set_deterministic(self.m["seed"])
        stage = "setup"
        try:
            stage = "data"
            self.stage_data()
            stage = "model"
            self.stage_model()
            stage = "attack"
            self.stage_attack()
            stage = "defenses"
            self.stage_defenses()
            stage = "summary"
            write_json(os.path.join(self.run_dir, "summary.json"),
                       {"reports": self.reports})
            write_json(os.path.join(self.run_dir, "manifest.lock.json"),
                       {**self.m, "version": __version__})
        except Exception as err:
            write_json(os.path.join(self.run_dir, "FAILED.json"),
                       {"stage": stage, "error": str(err),
                        "traceback": traceback.format_exc()})
            raise
        return self.reports


def run_experiment(manifest, overrides=None, verbose=False):
    """Validate then execute a manifest; returns the report list."""
    findings = validate_manifest(manifest)
    if findings:
        raise ValueError("manifest validation failed:\n- " + "\n- ".join(findings))
    resolved = resolve_manifest(manifest, overrides)
    return ExperimentRunner(resolved, verbose=verbose).run()


def export_poison_only(manifest, overrides=None, verbose=False):
    """Build and export the poisoned dataset without any training."""
    resolved = resolve_manifest(manifest, overrides)
    if resolved["attack"] is None:
        raise ValueError("export-poison requires an attack block")
    if resolved["deterministic"]:
        set_deterministic(resolved["seed"])
    benign_train, benign_test = load_dataset(resolved["dataset"], resolved["seed"])
    shape = benign_train.image_shape
    model = build_model(resolved["model"]["architecture"],
                        benign_train.num_classes,
                        (shape[2], shape[0], shape[1]))
    attack = build_attack(resolved, benign_train, benign_test, model)
    out = os.path.join(resolved["output_dir"], resolved["experiment_name"],
                       "poisoned_data")
    export_poisoned_dataset(attack.poisoned_train, attack.manifest, out)
    if verbose:
        print(f"exported poisoned dataset to {out}")
    return out
