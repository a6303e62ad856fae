"""Colorspace conversion and HSV band membership predicates.

Everything here is a pure function; the array variants are vectorized over
whole images so mask extraction stays fast on full-resolution frames.

Conventions: hue in degrees [0, 360), saturation and value in [0, 1].
Achromatic pixels (s == 0) get hue 0 so predicates stay deterministic.
"""

from __future__ import annotations

from typing import Tuple

import numpy as np

from .model import HSVBand, ImageRGB


def rgb_to_hsv(r: float, g: float, b: float) -> Tuple[float, float, float]:
    """Standard hexcone conversion of one normalized RGB triple."""
    for c in (r, g, b):
        if not (0.0 <= c <= 1.0):
            raise ValueError(f"channel {c} outside [0, 1]")
    v = max(r, g, b)
    c = v - min(r, g, b)
    if c == 0.0:
        h = 0.0
    elif v == r:
        h = 60.0 * (((g - b) / c) % 6.0)
    elif v == g:
        h = 60.0 * ((b - r) / c + 2.0)
    else:
        h = 60.0 * ((r - g) / c + 4.0)
    if h >= 360.0:
        h -= 360.0
    s = 0.0 if v == 0.0 else c / v
    return (h, s, v)


def hsv_to_rgb(h: float, s: float, v: float) -> Tuple[float, float, float]:
    """Inverse hexcone conversion."""
    if not (0.0 <= h < 360.0):
        raise ValueError(f"hue {h} outside [0, 360)")
    if not (0.0 <= s <= 1.0 and 0.0 <= v <= 1.0):
        raise ValueError("saturation and value must lie in [0, 1]")
    c = v * s
    hp = h / 60.0
    x = c * (1.0 - abs(hp % 2.0 - 1.0))
    sector = int(hp) % 6
    r1, g1, b1 = (
        (c, x, 0.0), (x, c, 0.0), (0.0, c, x),
        (0.0, x, c), (x, 0.0, c), (c, 0.0, x),
    )[sector]
    m = v - c
    return (r1 + m, g1 + m, b1 + m)


def rgb_planes_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """Vectorized conversion of an (..., 3) normalized RGB array to HSV planes."""
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    c = v - rgb.min(axis=-1)
    h = np.zeros_like(v)
    safe_c = np.where(c == 0.0, 1.0, c)
    sel = (c > 0.0) & (v == r)
    h = np.where(sel, ((g - b) / safe_c) % 6.0, h)
    sel = (c > 0.0) & (v == g) & (v != r)
    h = np.where(sel, (b - r) / safe_c + 2.0, h)
    sel = (c > 0.0) & (v == b) & (v != r) & (v != g)
    h = np.where(sel, (r - g) / safe_c + 4.0, h)
    h = h * 60.0
    h = np.where(h >= 360.0, h - 360.0, h)
    s = np.where(v == 0.0, 0.0, c / np.where(v == 0.0, 1.0, v))
    return np.stack([h, s, v], axis=-1)


def image_to_hsv(img: ImageRGB) -> np.ndarray:
    """Per-pixel HSV planes of an image; output shape (H, W, 3)."""
    return rgb_planes_to_hsv(img.to_float())


def hue_in_range(h, hue_min: float, hue_max: float):
    """Membership in a closed hue interval, wrapping through 0 when min > max.

    Works on scalars and arrays alike.
    """
    if hue_min > hue_max:
        return (h >= hue_min) | (h <= hue_max)
    return (h >= hue_min) & (h <= hue_max)


def in_band(h: float, s: float, v: float, band: HSVBand) -> bool:
    """True iff the HSV triple lies inside the (possibly wrapped) band."""
    return bool(
        hue_in_range(h, band.hue_min, band.hue_max)
        and band.sat_min <= s <= band.sat_max
        and band.val_min <= v <= band.val_max
    )


def band_mask(hsv: np.ndarray, band: HSVBand) -> np.ndarray:
    """Boolean membership mask over precomputed HSV planes of shape (H, W, 3)."""
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    return (
        hue_in_range(h, band.hue_min, band.hue_max)
        & (s >= band.sat_min) & (s <= band.sat_max)
        & (v >= band.val_min) & (v <= band.val_max)
    )
