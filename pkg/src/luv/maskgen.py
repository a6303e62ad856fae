"""Label extraction from UV images: per-class HSV thresholding, morphological
cleanup, connected components, and blob-to-keypoint reduction.

All functions are pure; batch callers may process samples in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .colorops import band_mask, image_to_hsv
from .model import CalibrationProfile, ClassSpec, ImageRGB, Keypoint, Mask

# 8-connectivity: thin diagonal structures stay single components.
_CONN8 = np.ones((3, 3), dtype=int)


@dataclass(frozen=True)
class BlobStats:
    """One connected component: size, subpixel centroid, and bounding box.

    The bounding box is (min_v, min_u, max_v, max_u), inclusive.
    """

    class_id: int
    pixel_count: int
    centroid: Tuple[float, float]  # (u, v)
    bbox: Tuple[int, int, int, int]

    def __post_init__(self):
        if self.pixel_count < 1:
            raise ValueError("blob must contain at least one pixel")
        u, v = self.centroid
        min_v, min_u, max_v, max_u = self.bbox
        if not (min_u <= u <= max_u and min_v <= v <= max_v):
            raise ValueError("centroid must lie inside the bounding box")


def disk_element(radius: int) -> np.ndarray:
    """Disk structuring element: offsets with euclidean norm <= radius."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    span = np.arange(-radius, radius + 1)
    yy, xx = np.meshgrid(span, span, indexing="ij")
    return (yy * yy + xx * xx) <= radius * radius


def threshold_class(uv_img: ImageRGB, spec: ClassSpec) -> np.ndarray:
    """Boolean mask of pixels inside the class band."""
    return band_mask(image_to_hsv(uv_img), spec.band)


def morph_clean(mask: np.ndarray, open_radius: int, close_radius: int) -> np.ndarray:
    """Opening then closing with disk elements; radius 0 skips that stage.

    Out-of-image pixels count as background for dilation and as foreground
    for erosion, so solid regions touching the border survive opening and
    closing never eats the border.
    """
    mask = np.asarray(mask, dtype=bool)
    out = mask
    if open_radius > 0:
        se = disk_element(open_radius)
        out = ndimage.binary_erosion(out, se, border_value=1)
        out = ndimage.binary_dilation(out, se, border_value=0)
    if close_radius > 0:
        se = disk_element(close_radius)
        out = ndimage.binary_dilation(out, se, border_value=0)
        out = ndimage.binary_erosion(out, se, border_value=1)
    return out if out is not mask else mask.copy()


def connected_components(mask: np.ndarray, class_id: int = 0) -> List[BlobStats]:
    """8-connected components ordered by (min row, min column) of each blob."""
    mask = np.asarray(mask, dtype=bool)
    labeled, n = ndimage.label(mask, structure=_CONN8)
    if n == 0:
        return []
    counts = np.bincount(labeled.ravel(), minlength=n + 1)
    vs, us = np.nonzero(mask)
    labels_flat = labeled[vs, us]
    sum_u = np.bincount(labels_flat, weights=us, minlength=n + 1)
    sum_v = np.bincount(labels_flat, weights=vs, minlength=n + 1)
    blobs = []
    slices = ndimage.find_objects(labeled)
    for i in range(1, n + 1):
        sl = slices[i - 1]
        count = int(counts[i])
        blobs.append(
            BlobStats(
                class_id=class_id,
                pixel_count=count,
                centroid=(float(sum_u[i] / count), float(sum_v[i] / count)),
                bbox=(sl[0].start, sl[1].start, sl[0].stop - 1, sl[1].stop - 1),
            )
        )
    blobs.sort(key=lambda b: (b.bbox[0], b.bbox[1]))
    return blobs


def class_blobs(uv_img: ImageRGB, spec: ClassSpec) -> List[BlobStats]:
    """Threshold, clean, and decompose one class into area-filtered blobs."""
    raw = threshold_class(uv_img, spec)
    cleaned = morph_clean(raw, spec.morphology_open_radius, spec.morphology_close_radius)
    blobs = connected_components(cleaned, class_id=spec.class_id)
    return [b for b in blobs if b.pixel_count >= spec.min_area]


def extract_labels(
    uv_images: Sequence[Tuple[float, ImageRGB]],
    profile: CalibrationProfile,
) -> Tuple[Mask, List[Keypoint]]:
    """Extract the segmentation mask and keypoints for one sample.

    Multiple exposure-bracketed UV images are fused first. Per class, in
    profile order: threshold, morphological cleanup, connected components,
    area filtering. Keypoint-mode classes contribute centroids only; other
    classes write their id into the mask, later classes overwriting earlier
    ones on conflicts.
    """
    if not uv_images:
        raise ValueError("need at least one UV image")
    shapes = {img.shape for _, img in uv_images}
    if len(shapes) > 1:
        raise ValueError(f"UV images disagree on dimensions: {sorted(shapes)}")
    if len(uv_images) == 1:
        uv = uv_images[0][1]
    else:
        from .fusion import fuse_exposures

        uv = fuse_exposures([img for _, img in uv_images])

    hsv = image_to_hsv(uv)
    out = np.zeros(uv.shape, dtype=np.uint8)
    keypoints: List[Keypoint] = []
    for spec in profile.classes:
        raw = band_mask(hsv, spec.band)
        cleaned = morph_clean(raw, spec.morphology_open_radius, spec.morphology_close_radius)
        if spec.keypoint_mode:
            for blob in connected_components(cleaned, class_id=spec.class_id):
                if blob.pixel_count >= spec.min_area:
                    keypoints.append(
                        Keypoint(
                            class_id=spec.class_id,
                            u=blob.centroid[0],
                            v=blob.centroid[1],
                            area=blob.pixel_count,
                        )
                    )
        else:
            if spec.min_area > 1:
                labeled, n = ndimage.label(cleaned, structure=_CONN8)
                if n:
                    counts = np.bincount(labeled.ravel(), minlength=n + 1)
                    small = counts < spec.min_area
                    small[0] = False
                    cleaned = cleaned & ~small[labeled]
            out[cleaned] = spec.class_id
    return Mask(out), keypoints
