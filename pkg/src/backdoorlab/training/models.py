"""Model architectures and the model handle passed around the toolkit.

Two reference architectures are provided: a compact two-block CNN for
desk-scale runs and an 18-layer residual network for 32x32-style inputs.
Both end in a module named ``classifier`` so layer-targeted defenses
(freezing, penultimate-feature extraction) resolve uniformly.
"""

import copy
from dataclasses import dataclass, field

import torch
import torch.nn as nn

ARCHITECTURES = ("small-cnn", "resnet-18-class")


class SmallCNN(nn.Module):
    """Two conv blocks plus two dense layers."""

    def __init__(self, image_shape=(1, 28, 28), num_classes=10):
        super().__init__()
        c, h, w = image_shape
        self.conv1 = nn.Sequential(nn.Conv2d(c, 32, 3, padding=1),
                                   nn.BatchNorm2d(32), nn.ReLU(),
                                   nn.MaxPool2d(2))
        self.conv2 = nn.Sequential(nn.Conv2d(32, 64, 3, padding=1),
                                   nn.BatchNorm2d(64), nn.ReLU(),
                                   nn.MaxPool2d(2))
        flat = 64 * (h // 4) * (w // 4)
        self.fc1 = nn.Sequential(nn.Flatten(), nn.Dropout(0.25),
                                 nn.Linear(flat, 128), nn.ReLU())
        self.classifier = nn.Sequential(nn.Dropout(0.5),
                                        nn.Linear(128, num_classes))

    def forward(self, x):
        x = self.conv1(x)
        x = self.conv2(x)
        x = self.fc1(x)
        return self.classifier(x)


class BasicBlock(nn.Module):
    expansion = 1

    def __init__(self, in_planes, planes, stride=1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_planes, planes, 3, stride=stride, padding=1,
                               bias=False)
        self.bn1 = nn.BatchNorm2d(planes)
        self.conv2 = nn.Conv2d(planes, planes, 3, stride=1, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(planes)
        self.shortcut = nn.Sequential()
        if stride != 1 or in_planes != planes:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_planes, planes, 1, stride=stride, bias=False),
                nn.BatchNorm2d(planes))

    def forward(self, x):
        out = torch.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        out = out + self.shortcut(x)
        return torch.relu(out)


class ResNet18(nn.Module):
    """18-layer residual network with a 3x3 stem, sized for small images."""

    def __init__(self, image_shape=(3, 32, 32), num_classes=10):
        super().__init__()
        c = image_shape[0]
        self.in_planes = 64
        self.conv1 = nn.Conv2d(c, 64, 3, stride=1, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(64)
        self.layer1 = self._make_layer(64, 2, stride=1)
        self.layer2 = self._make_layer(128, 2, stride=2)
        self.layer3 = self._make_layer(256, 2, stride=2)
        self.layer4 = self._make_layer(512, 2, stride=2)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.classifier = nn.Linear(512, num_classes)

    def _make_layer(self, planes, blocks, stride):
        strides = [stride] + [1] * (blocks - 1)
        layers = []
        for s in strides:
            layers.append(BasicBlock(self.in_planes, planes, s))
            self.in_planes = planes
        return nn.Sequential(*layers)

    def forward(self, x):
        out = torch.relu(self.bn1(self.conv1(x)))
        out = self.layer1(out)
        out = self.layer2(out)
        out = self.layer3(out)
        out = self.layer4(out)
        out = self.pool(out).flatten(1)
        return self.classifier(out)


@dataclass
class ModelHandle:
    """Architecture descriptor plus the live parameter store.

    ``extras`` carries post-hoc modifications that must survive
    checkpointing (e.g. pruning masks).
    """

    architecture: str
    num_classes: int
    image_shape: tuple
    module: nn.Module
    extras: dict = field(default_factory=dict)

    def forward(self, batch):
        """Batch of N x C x H x W floats -> N x K logits."""
        return self.module(batch)

    def snapshot(self):
        """Deep copy; later training of the source does not mutate it."""
        clone = copy.deepcopy(self.module)
        clone.eval()
        return ModelHandle(self.architecture, self.num_classes,
                           self.image_shape, clone, copy.deepcopy(self.extras))

    def named_layers(self):
        return [name for name, _ in self.module.named_modules() if name]


def build_model(architecture, num_classes, image_shape):
    """Instantiate a reference architecture.

    Args:
        architecture: one of ``small-cnn``, ``resnet-18-class``.
        num_classes: output dimension K.
        image_shape: (C, H, W) of the model input.
    """
    if architecture == "small-cnn":
        module = SmallCNN(image_shape, num_classes)
    elif architecture == "resnet-18-class":
        module = ResNet18(image_shape, num_classes)
    else:
        raise ValueError(
            f"unknown architecture {architecture!r}; supported: {ARCHITECTURES}")
    return ModelHandle(architecture, num_classes, tuple(image_shape), module)


def wrap_model(module, num_classes, image_shape, architecture="custom"):
    """Wrap a user-provided ``nn.Module`` in a handle."""
    return ModelHandle(architecture, num_classes, tuple(image_shape), module)
