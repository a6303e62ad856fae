"""Exposure fusion for bracketed UV captures.

Blends a stack of differently exposed images of the same scene into one
well-exposed result by weighting each input per pixel (contrast, color
saturation, well-exposedness) and merging Laplacian pyramids. Operates on
display-referred values directly; no radiance recovery.
"""

from __future__ import annotations

import math
from typing import List, Sequence

import numpy as np
from scipy import ndimage

from .model import ImageRGB

# 5-tap binomial kernel, separable.
_KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0

WEIGHT_FLOOR = 1e-12
_SIGMA = 0.2


def pyramid_levels(height: int, width: int) -> int:
    """Number of pyramid levels used for an image of the given size."""
    return max(1, int(math.floor(math.log2(min(height, width)))) - 2)


def _blur(arr: np.ndarray) -> np.ndarray:
    out = ndimage.convolve1d(arr, _KERNEL, axis=0, mode="nearest")
    return ndimage.convolve1d(out, _KERNEL, axis=1, mode="nearest")


def _downsample(arr: np.ndarray) -> np.ndarray:
    return _blur(arr)[::2, ::2]


def _upsample(arr: np.ndarray, shape: tuple) -> np.ndarray:
    """Expand a level to the given (H, W), inverse of ceil-halving.

    Zero-stuffed samples are filtered with the doubled kernel and divided
    by the filtered sample indicator, which keeps constants exact for any
    parity of the target size.
    """
    num = np.zeros(shape + arr.shape[2:], dtype=np.float64)
    num[::2, ::2] = arr
    den = np.zeros(shape, dtype=np.float64)
    den[::2, ::2] = 1.0
    doubled = _KERNEL * 2.0
    for axis in (0, 1):
        num = ndimage.convolve1d(num, doubled, axis=axis, mode="constant", cval=0.0)
        den = ndimage.convolve1d(den, doubled, axis=axis, mode="constant", cval=0.0)
    if num.ndim == 3:
        den = den[:, :, None]
    return num / den


def gaussian_pyramid(arr: np.ndarray, levels: int) -> List[np.ndarray]:
    out = [np.asarray(arr, dtype=np.float64)]
    for _ in range(levels - 1):
        out.append(_downsample(out[-1]))
    return out


def laplacian_pyramid(arr: np.ndarray, levels: int) -> List[np.ndarray]:
    """Difference-of-levels pyramid; the last entry is the coarsest level."""
    gauss = gaussian_pyramid(arr, levels)
    out = []
    for fine, coarse in zip(gauss, gauss[1:]):
        out.append(fine - _upsample(coarse, fine.shape[:2]))
    out.append(gauss[-1])
    return out


def collapse_pyramid(pyramid: Sequence[np.ndarray]) -> np.ndarray:
    out = pyramid[-1]
    for level in reversed(pyramid[:-1]):
        out = _upsample(out, level.shape[:2]) + level
    return out


def well_exposedness(channels: np.ndarray) -> np.ndarray:
    """Product over channels of a Gaussian preference for mid-range values."""
    return np.exp(-((channels - 0.5) ** 2) / (2.0 * _SIGMA**2)).prod(axis=-1)


def quality_weights(img: ImageRGB) -> np.ndarray:
    """Per-pixel fusion weight: contrast x saturation x well-exposedness.

    Weights are floored at a tiny positive value so normalization across a
    stack never divides by zero.
    """
    rgb = img.to_float()
    gray = rgb.mean(axis=2)
    contrast = np.abs(ndimage.laplace(gray, mode="nearest"))
    saturation = rgb.std(axis=2)
    weight = contrast * saturation * well_exposedness(rgb)
    return np.maximum(weight, WEIGHT_FLOOR)


def fuse_exposures(imgs: Sequence[ImageRGB]) -> ImageRGB:
    """Merge an exposure bracket into one image.

    Per-pixel weights are normalized across the stack; each input's
    Laplacian pyramid is blended by the Gaussian pyramid of its weights and
    the result collapsed and clamped to [0, 1].
    """
    if not imgs:
        raise ValueError("need at least one image to fuse")
    shapes = {img.shape for img in imgs}
    if len(shapes) > 1:
        raise ValueError(f"images disagree on dimensions: {sorted(shapes)}")
    h, w = imgs[0].shape
    levels = pyramid_levels(h, w)

    weights = np.stack([quality_weights(img) for img in imgs])
    weights /= weights.sum(axis=0)

    blended = None
    for img, weight in zip(imgs, weights):
        lap = laplacian_pyramid(img.to_float(), levels)
        gw = gaussian_pyramid(weight, levels)
        contrib = [lv * wv[:, :, None] for lv, wv in zip(lap, gw)]
        if blended is None:
            blended = contrib
        else:
            blended = [b + c for b, c in zip(blended, contrib)]

    fused = collapse_pyramid(blended)
    return ImageRGB.from_float(np.clip(fused, 0.0, 1.0))
