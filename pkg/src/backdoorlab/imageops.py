"""Low-level image array helpers shared by triggers, warps, and defenses.

Images are stored as uint8 H x W x C arrays with intensities in [0, 255].
Transforms run on a float32 view scaled to [0, 1]; results are clamped and
re-quantized when written back to storage.
"""

import numpy as np


def to_float(img):
    """uint8 [0, 255] -> float32 [0, 1]."""
    return np.asarray(img).astype(np.float32) / 255.0


def to_uint8(img):
    """float32 [0, 1] -> uint8 [0, 255], rounding half away from zero."""
    scaled = np.clip(np.asarray(img), 0.0, 1.0).astype(np.float64) * 255.0
    return np.floor(scaled + 0.5).astype(np.uint8)


def clamp01(img):
    return np.clip(img, 0.0, 1.0)


def sample_bilinear(img, rows, cols):
    """Sample ``img`` at fractional pixel coordinates with border clamping.

    Args:
        img: H x W or H x W x C float array.
        rows, cols: equally shaped float arrays of sampling coordinates
            (row index, column index). Out-of-range coordinates clamp to
            the nearest border pixel.

    Returns:
        Array shaped like ``rows`` (plus the channel axis of ``img``).
    """
    h, w = img.shape[:2]
    rows = np.clip(rows, 0.0, h - 1.0)
    cols = np.clip(cols, 0.0, w - 1.0)

    r0 = np.floor(rows).astype(np.int64)
    c0 = np.floor(cols).astype(np.int64)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = (rows - r0).astype(img.dtype if img.dtype.kind == "f" else np.float32)
    fc = (cols - c0).astype(fr.dtype)

    if img.ndim == 3:
        fr = fr[..., None]
        fc = fc[..., None]

    top = img[r0, c0] * (1.0 - fc) + img[r0, c1] * fc
    bot = img[r1, c0] * (1.0 - fc) + img[r1, c1] * fc
    return top * (1.0 - fr) + bot * fr


def sample_nearest(img, rows, cols):
    """Sample ``img`` at the nearest pixel, clamping to the border."""
    h, w = img.shape[:2]
    r = np.clip(np.floor(rows + 0.5).astype(np.int64), 0, h - 1)
    c = np.clip(np.floor(cols + 0.5).astype(np.int64), 0, w - 1)
    return img[r, c]


def resize_bilinear(img, out_hw):
    """Bilinear resize using corner-aligned coordinates.

    Resizing to the input size reproduces the input exactly.
    """
    h, w = img.shape[:2]
    oh, ow = out_hw
    if oh < 1 or ow < 1:
        raise ValueError(f"invalid output size {out_hw}")
    if (oh, ow) == (h, w):
        return img.copy()
    rows = np.linspace(0.0, h - 1.0, oh) if oh > 1 else np.zeros(1)
    cols = np.linspace(0.0, w - 1.0, ow) if ow > 1 else np.zeros(1)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return sample_bilinear(img, rr, cc)


def affine_warp(img, angle_deg=0.0, translate=(0.0, 0.0), scale=1.0, fill=0.0):
    """Rotate/scale about the image center, then translate; bilinear, zero fill.

    Args:
        img: H x W x C float image.
        angle_deg: counter-clockwise rotation in degrees.
        translate: (tx, ty) shift in pixels (columns, rows).
        scale: isotropic scale factor, > 0.
        fill: value for samples pulled from outside the image.
    """
    h, w = img.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    theta = np.deg2rad(angle_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)

    rr, cc = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    # Inverse map: undo translation, then inverse rotate/scale about center.
    x = cc - cx - translate[0]
    y = rr - cy - translate[1]
    src_c = (cos_t * x + sin_t * y) / scale + cx
    src_r = (-sin_t * x + cos_t * y) / scale + cy

    out = sample_bilinear(img, src_r, src_c)
    inside = (src_r >= 0) & (src_r <= h - 1) & (src_c >= 0) & (src_c <= w - 1)
    if img.ndim == 3:
        inside = inside[..., None]
    return np.where(inside, out, np.asarray(fill, dtype=out.dtype))
