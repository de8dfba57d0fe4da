"""Dataset containers and loaders.

A dataset is a fixed stack of uint8 H x W x C images plus integer labels.
Per-sample transforms run lazily at access time on a float32 [0, 1] view,
clamping after every step. Sample order is stable: sample ``i`` is the same
underlying image across runs and processes.
"""

import gzip
import json
import os
import pickle
import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from ..imageops import clamp01, to_float
from .transforms import StochasticTransform, sample_rng

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")


@dataclass
class ImageSample:
    """One stored sample: uint8 pixels, class label, stable dataset index."""

    pixels: np.ndarray
    label: int
    index: int


class DatasetHandle:
    """Ordered image dataset with a per-sample transform chain.

    Args:
        images: N x H x W x C uint8 array (C may be 1 or 3).
        labels: length-N integer class indices in [0, num_classes).
        num_classes: number of classes K.
        transform_chain: transforms applied in order at access time. Plain
            callables take and return a float [0, 1] image; instances of
            ``StochasticTransform`` additionally receive a per-sample RNG
            derived from (seed, epoch, index).
        split: "train" or "test".
        class_names: optional class names (folder ingestion keeps them).
        seed: base seed for per-sample transform randomness.
    """

    def __init__(self, images, labels, num_classes, transform_chain=(),
                 split="train", class_names=None, seed=0):
        images = np.ascontiguousarray(images)
        labels = np.asarray(labels, dtype=np.int64)
        if images.ndim == 3:
            images = images[..., None]
        if images.ndim != 4:
            raise ValueError(f"images must be N x H x W x C, got shape {images.shape}")
        if images.dtype != np.uint8:
            raise ValueError(f"images must be uint8, got {images.dtype}")
        if len(images) != len(labels):
            raise ValueError(f"{len(images)} images vs {len(labels)} labels")
        if len(labels) and (labels.min() < 0 or labels.max() >= num_classes):
            raise ValueError("labels outside [0, num_classes)")
        if split not in ("train", "test"):
            raise ValueError(f"unknown split {split!r}")
        self.images = images
        self.labels = labels
        self.num_classes = int(num_classes)
        self.transform_chain = list(transform_chain)
        self.split = split
        self.class_names = list(class_names) if class_names is not None else [
            str(k) for k in range(num_classes)]
        self.seed = int(seed)
        self.epoch = 0

    def __len__(self):
        return len(self.images)

    @property
    def image_shape(self):
        return self.images.shape[1:]

    def set_epoch(self, epoch):
        """Advance the epoch counter used to derive per-sample transform RNGs."""
        self.epoch = int(epoch)

    def raw(self, index):
        """Stored uint8 pixels, before any transform."""
        return self.images[index]

    def sample(self, index):
        return ImageSample(self.images[index], int(self.label_for(index)), index)

    # Subclasses (poisoned views) override these two hooks.
    def chain_for(self, index):
        return self.transform_chain

    def label_for(self, index):
        return self.labels[index]

    def __getitem__(self, index):
        img = to_float(self.images[index])
        rng = None
        for t in self.chain_for(index):
            if isinstance(t, StochasticTransform):
                if rng is None:
                    rng = sample_rng(self.seed, self.epoch, index)
                img = t(img, rng)
            else:
                img = t(img)
            img = clamp01(img)
        return img, int(self.label_for(index))

    def with_transforms(self, transform_chain):
        """Same storage, different transform chain."""
        out = DatasetHandle(self.images, self.labels, self.num_classes,
                            transform_chain, self.split, self.class_names,
                            self.seed)
        return out

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return DatasetHandle(self.images[indices], self.labels[indices],
                             self.num_classes, self.transform_chain,
                             self.split, self.class_names, self.seed)


# ---------------------------------------------------------------------------
# Archive loaders


def _read_idx(path):
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rb") as f:
        zero, dtype_code, ndim = struct.unpack(">HBB", f.read(4))
        if zero != 0 or dtype_code != 0x08:
            raise ValueError(f"{path}: not an unsigned-byte IDX file")
        dims = struct.unpack(">" + "I" * ndim, f.read(4 * ndim))
        data = np.frombuffer(f.read(), dtype=np.uint8)
    if data.size != int(np.prod(dims)):
        raise ValueError(f"{path}: truncated IDX payload")
    return data.reshape(dims)


def load_mnist_like(root, split="train"):
    """Load an MNIST-style IDX archive directory.

    Expects ``{train,t10k}-images-idx3-ubyte`` and
    ``{train,t10k}-labels-idx1-ubyte`` (optionally gzipped) under ``root``.
    """
    prefix = "train" if split == "train" else "t10k"
    images = labels = None
    for suffix in ("", ".gz"):
        ipath = os.path.join(root, f"{prefix}-images-idx3-ubyte{suffix}")
        lpath = os.path.join(root, f"{prefix}-labels-idx1-ubyte{suffix}")
        if os.path.exists(ipath) and os.path.exists(lpath):
            images = _read_idx(ipath)
            labels = _read_idx(lpath)
            break
    if images is None:
        raise FileNotFoundError(f"no {prefix}-* IDX files under {root}")
    return DatasetHandle(images[..., None], labels.astype(np.int64),
                         num_classes=int(labels.max()) + 1, split=split)


def load_cifar10_like(root, split="train"):
    """Load a CIFAR10-style directory of pickled batches.

    Expects ``data_batch_1..5`` (train) or ``test_batch`` (test), each a
    pickle with ``data`` (N x 3072 uint8, CHW order) and ``labels``.
    """
    names = [f"data_batch_{i}" for i in range(1, 6)] if split == "train" else ["test_batch"]
    chunks, labels = [], []
    for name in names:
        path = os.path.join(root, name)
        if not os.path.exists(path):
            if split == "train" and chunks:
                break
            raise FileNotFoundError(f"missing batch file {path}")
        with open(path, "rb") as f:
            entry = pickle.load(f, encoding="bytes")
        data = entry.get(b"data", entry.get("data"))
        labs = entry.get(b"labels", entry.get("labels"))
        chunks.append(np.asarray(data, dtype=np.uint8))
        labels.extend(int(v) for v in labs)
    data = np.concatenate(chunks, axis=0)
    side = int(np.sqrt(data.shape[1] // 3))
    images = data.reshape(-1, 3, side, side).transpose(0, 2, 3, 1)
    labels = np.asarray(labels, dtype=np.int64)
    return DatasetHandle(np.ascontiguousarray(images), labels,
                         num_classes=int(labels.max()) + 1, split=split)


def load_folder(root, split="train"):
    """Load a folder-per-class image directory.

    Class name = directory name; classes are ordered lexicographically and
    files within a class by filename, so ordering is stable across runs.
    All images must share one shape.
    """
    class_names = sorted(d for d in os.listdir(root)
                         if os.path.isdir(os.path.join(root, d)))
    if not class_names:
        raise ValueError(f"no class directories under {root}")
    images, labels = [], []
    for k, name in enumerate(class_names):
        cdir = os.path.join(root, name)
        for fname in sorted(os.listdir(cdir)):
            if not fname.lower().endswith(IMAGE_EXTENSIONS):
                continue
            with Image.open(os.path.join(cdir, fname)) as im:
                arr = np.asarray(im, dtype=np.uint8)
            if arr.ndim == 2:
                arr = arr[..., None]
            images.append(arr)
            labels.append(k)
    if not images:
        raise ValueError(f"no images under {root}")
    shapes = {im.shape for im in images}
    if len(shapes) != 1:
        raise ValueError(f"images under {root} have mixed shapes: {sorted(shapes)}")
    return DatasetHandle(np.stack(images), np.asarray(labels, dtype=np.int64),
                         num_classes=len(class_names), split=split,
                         class_names=class_names)


def export_folder(dataset, root, render=True):
    """Write a dataset as a folder-per-class tree of PNG files.

    Filenames are the zero-padded dataset indices, so ingestion order and
    provenance stay reconstructible. With ``render=True`` the transform
    chain is applied and the result re-quantized; otherwise raw storage
    pixels are written.
    """
    from ..imageops import to_uint8

    os.makedirs(root, exist_ok=True)
    width = max(6, len(str(max(len(dataset) - 1, 0))))
    for i in range(len(dataset)):
        if render:
            img, label = dataset[i]
            pixels = to_uint8(img)
        else:
            pixels, label = dataset.raw(i), int(dataset.label_for(i))
        cdir = os.path.join(root, dataset.class_names[label])
        os.makedirs(cdir, exist_ok=True)
        arr = pixels[..., 0] if pixels.shape[-1] == 1 else pixels
        Image.fromarray(arr).save(os.path.join(cdir, f"{i:0{width}d}.png"))


def write_json(path, payload):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
