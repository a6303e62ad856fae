"""Exposure fusion tests: weight formula values, pyramid round-trips, and
blending behavior on hand-built brackets.
"""

import math

import numpy as np
import pytest

from luv.fusion import (
    WEIGHT_FLOOR,
    collapse_pyramid,
    fuse_exposures,
    gaussian_pyramid,
    laplacian_pyramid,
    pyramid_levels,
    quality_weights,
    well_exposedness,
)
from luv.model import ImageRGB


def clipped_count(img, lo=0.02, hi=0.98):
    v = img.to_float().max(axis=2)
    return int(((v < lo) | (v > hi)).sum())


class TestQualityWeights:
    def test_constant_gray_floors_to_minimum(self):
        pix = np.full((8, 8, 3), 128, dtype=np.uint8)
        w = quality_weights(ImageRGB(pix))
        assert np.all(w == WEIGHT_FLOOR)

    def test_well_exposedness_peak(self):
        assert well_exposedness(np.array([0.5, 0.5, 0.5])) == pytest.approx(1.0)

    def test_well_exposedness_at_zero(self):
        # exp(-(0.5)^2 / (2 * 0.2^2)) per channel
        per_channel = math.exp(-3.125)
        got = well_exposedness(np.array([0.0, 0.5, 0.5]))
        assert got == pytest.approx(per_channel, rel=1e-12)
        assert per_channel == pytest.approx(0.04393693362340742, rel=1e-12)

    def test_weights_positive(self):
        rng = np.random.default_rng(5)
        img = ImageRGB(rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8))
        assert (quality_weights(img) > 0).all()

    def test_edge_has_more_contrast_weight_than_flat(self):
        pix = np.full((16, 16, 3), 100, dtype=np.uint8)
        pix[:, 8:] = 180
        pix[:, :, 0] += 20  # give saturation a nonzero term everywhere
        w = quality_weights(ImageRGB(pix))
        assert w[8, 7] > w[8, 2]


class TestPyramids:
    def test_levels_formula(self):
        assert pyramid_levels(720, 1280) == 7
        assert pyramid_levels(8, 8) == 1
        assert pyramid_levels(16, 1024) == 2
        assert pyramid_levels(1, 1) == 1

    def test_roundtrip_exact_on_random_images(self):
        rng = np.random.default_rng(13)
        for h, w in [(64, 64), (33, 47), (17, 90)]:
            arr = rng.random((h, w, 3))
            levels = pyramid_levels(h, w)
            rebuilt = collapse_pyramid(laplacian_pyramid(arr, levels))
            assert np.abs(rebuilt - arr).max() < 1e-6

    def test_roundtrip_single_level(self):
        rng = np.random.default_rng(17)
        arr = rng.random((5, 5, 3))
        rebuilt = collapse_pyramid(laplacian_pyramid(arr, 1))
        assert np.abs(rebuilt - arr).max() == 0.0

    def test_gaussian_pyramid_sizes_ceil_halved(self):
        arr = np.zeros((21, 13))
        sizes = [g.shape for g in gaussian_pyramid(arr, 4)]
        assert sizes == [(21, 13), (11, 7), (6, 4), (3, 2)]

    def test_constant_image_stays_constant(self):
        arr = np.full((30, 19, 3), 0.37)
        levels = pyramid_levels(30, 19)
        for g in gaussian_pyramid(arr, levels):
            assert np.abs(g - 0.37).max() < 1e-12
        rebuilt = collapse_pyramid(laplacian_pyramid(arr, levels))
        assert np.abs(rebuilt - 0.37).max() < 1e-12


class TestFuseExposures:
    def test_single_image_unchanged(self):
        rng = np.random.default_rng(21)
        img = ImageRGB(rng.integers(0, 256, size=(48, 64, 3), dtype=np.uint8))
        fused = fuse_exposures([img])
        assert fused == img

    def test_two_identical_images_reproduced(self):
        rng = np.random.default_rng(23)
        img = ImageRGB(rng.integers(0, 256, size=(32, 32, 3), dtype=np.uint8))
        fused = fuse_exposures([img, img])
        assert fused == img

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError):
            fuse_exposures([])

    def test_dimension_mismatch_rejected(self):
        a = ImageRGB(np.zeros((8, 8, 3), dtype=np.uint8))
        b = ImageRGB(np.zeros((8, 9, 3), dtype=np.uint8))
        with pytest.raises(ValueError):
            fuse_exposures([a, b])

    def test_output_in_range(self):
        rng = np.random.default_rng(27)
        imgs = [
            ImageRGB(rng.integers(0, 256, size=(40, 40, 3), dtype=np.uint8))
            for _ in range(3)
        ]
        fused = fuse_exposures(imgs)
        f = fused.to_float()
        assert f.min() >= 0.0 and f.max() <= 1.0

    def test_bracket_reduces_clipping(self):
        # dark exposure: left half crushed to black, right half readable.
        # bright exposure: left half readable, right half blown out.
        h, w = 64, 64
        dark = np.zeros((h, w, 3), dtype=np.uint8)
        dark[:, w // 2:] = 128
        bright = np.full((h, w, 3), 128, dtype=np.uint8)
        bright[:, w // 2:] = 255
        imgs = [ImageRGB(dark), ImageRGB(bright)]
        fused = fuse_exposures(imgs)
        n_fused = clipped_count(fused)
        assert n_fused < clipped_count(imgs[0])
        assert n_fused < clipped_count(imgs[1])

    def test_normalized_weights_sum_to_one(self):
        rng = np.random.default_rng(31)
        imgs = [
            ImageRGB(rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8))
            for _ in range(4)
        ]
        weights = np.stack([quality_weights(img) for img in imgs])
        weights /= weights.sum(axis=0)
        assert np.abs(weights.sum(axis=0) - 1.0).max() < 1e-9
