"""Elastic warping trigger.

A coarse k x k grid of random offsets is normalized to unit mean magnitude,
scaled by a strength factor, and upsampled to a dense per-pixel offset field
in normalized [-1, 1] coordinates. Warping resamples the image at
(identity grid + field), clamped to the valid coordinate range, so zero
strength reproduces the input exactly.
"""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..imageops import sample_bilinear, sample_nearest, to_float, to_uint8
from .data import ImageSample

INTERPOLATIONS = ("bilinear", "nearest")


@dataclass
class WarpField:
    """Dense 2D sampling-offset field derived from a coarse control grid.

    Attributes:
        control_grid: k x k x 2 raw offsets drawn in [-1, 1].
        strength: scale applied after normalization, >= 0.
        grid_size: k.
        field: H x W x 2 dense offsets; last axis is (x, y) in normalized
            coordinates (x along columns, y along rows).
    """

    control_grid: np.ndarray
    strength: float
    grid_size: int
    field: np.ndarray

    @property
    def image_size(self):
        return self.field.shape[:2]

    def sampling_grid(self):
        """Identity grid plus offsets, clamped to [-1, 1]."""
        h, w = self.field.shape[:2]
        grid = identity_grid(h, w) + self.field
        return np.clip(grid, -1.0, 1.0)

    def params(self):
        return {"grid_size": int(self.grid_size), "strength": float(self.strength)}


def identity_grid(h, w):
    """H x W x 2 grid of normalized (x, y) coordinates, corners at +-1."""
    xs = np.linspace(-1.0, 1.0, w)
    ys = np.linspace(-1.0, 1.0, h)
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx, gy], axis=-1)


def _upsample(coarse, out_hw):
    """Corner-aligned interpolation of a k x k channel onto H x W.

    Cubic spline when the grid carries enough points for it (k >= 4),
    linear otherwise.
    """
    k = coarse.shape[0]
    oh, ow = out_hw
    pts = np.linspace(-1.0, 1.0, k)
    method = "cubic" if k >= 4 else "linear"
    interp = RegularGridInterpolator((pts, pts), coarse, method=method)
    ys = np.linspace(-1.0, 1.0, oh)
    xs = np.linspace(-1.0, 1.0, ow)
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    return interp(np.stack([gy, gx], axis=-1))


def build_warp_field(grid_size, strength, image_size, seed=0):
    """Construct a warp field.

    Offsets are sampled uniformly in [-1, 1] on a grid_size^2 lattice,
    divided by their mean absolute value, scaled by ``strength``, and
    bicubically upsampled to the image size. Deterministic given the seed.
    """
    h, w = image_size
    k = int(grid_size)
    if k < 2:
        raise ValueError(f"grid_size must be >= 2, got {k}")
    if k > min(h, w):
        raise ValueError(f"grid_size {k} exceeds image size {image_size}")
    if strength < 0:
        raise ValueError(f"strength must be >= 0, got {strength}")

    rng = np.random.default_rng(seed)
    control = rng.uniform(-1.0, 1.0, size=(k, k, 2))
    scaled = strength * control / np.mean(np.abs(control))
    field = np.stack([_upsample(scaled[..., c], (h, w)) for c in range(2)], axis=-1)
    return WarpField(control_grid=control, strength=float(strength),
                     grid_size=k, field=field)


def warp_image(image, field: WarpField, interpolation="bilinear"):
    """Resample an image through a warp field.

    Out-of-range coordinates clamp to the border. uint8 in, uint8 out;
    float in, float out.
    """
    if interpolation not in INTERPOLATIONS:
        raise ValueError(f"interpolation must be one of {INTERPOLATIONS}")
    if isinstance(image, ImageSample):
        warped = warp_image(image.pixels, field, interpolation)
        return ImageSample(warped, image.label, image.index)
    image = np.asarray(image)
    if image.shape[:2] != field.image_size:
        raise ValueError(
            f"image shape {image.shape[:2]} does not match field {field.image_size}")

    quantize = image.dtype == np.uint8
    img = to_float(image) if quantize else image

    grid = field.sampling_grid()
    h, w = field.image_size
    cols = (grid[..., 0] + 1.0) / 2.0 * (w - 1)
    rows = (grid[..., 1] + 1.0) / 2.0 * (h - 1)
    if interpolation == "nearest":
        out = sample_nearest(img, rows, cols)
    else:
        out = sample_bilinear(img, rows, cols)
    return to_uint8(out) if quantize else out.astype(img.dtype, copy=False)


class WarpTrigger:
    """Chain transform warping a float [0, 1] image."""

    def __init__(self, field: WarpField, interpolation="bilinear"):
        if interpolation not in INTERPOLATIONS:
            raise ValueError(f"interpolation must be one of {INTERPOLATIONS}")
        self.field = field
        self.interpolation = interpolation

    def __call__(self, img):
        return warp_image(img, self.field, self.interpolation)
