"""Imaging primitives against independent scalar oracles."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from cccpipe.errors import DegeneratePolygon, DimensionMismatch
from cccpipe.imaging import (
    HsvRange,
    as_rgb,
    connected_components,
    disc_footprint,
    hsv_to_rgb,
    mask_area,
    mask_intersection,
    mask_to_polygons,
    mask_union,
    morphological_open,
    rasterize_polygon,
    rgb_to_hsv,
    threshold_hsv,
)

from conftest import (
    hsv_reference,
    opening_reference,
    rasterize_reference,
)


class TestRgbToHsv:
    @pytest.mark.parametrize("rgb,expected", [
        ((0, 0, 0), (0, 0, 0)),
        ((255, 255, 255), (0, 0, 255)),
        ((128, 128, 128), (0, 0, 128)),
        ((255, 0, 0), (0, 255, 255)),
        ((0, 255, 0), (60, 255, 255)),
        ((0, 0, 255), (120, 255, 255)),
        ((255, 255, 0), (30, 255, 255)),   # red/green tie goes to the red sector
        ((0, 255, 255), (90, 255, 255)),
        ((255, 0, 255), (150, 255, 255)),
        ((100, 50, 50), (0, 128, 100)),    # s = round(255 * 50 / 100) rounds .5 up
    ])
    def test_pinned_values(self, rgb, expected):
        assert tuple(rgb_to_hsv(np.array(rgb, dtype=np.uint8))) == expected

    def test_achromatic_iff_max_equals_min(self, rng):
        triples = rng.integers(0, 256, size=(2000, 3), dtype=np.uint8)
        hsv = rgb_to_hsv(triples)
        achro = triples.max(axis=1) == triples.min(axis=1)
        assert np.all(hsv[achro, 0] == 0)
        assert np.all(hsv[achro, 1] == 0)
        assert np.all(hsv[~achro, 1] > 0)

    def test_matches_scalar_reference(self, rng):
        triples = rng.integers(0, 256, size=(50_000, 3), dtype=np.uint8)
        got = rgb_to_hsv(triples)
        for (r, g, b), out in zip(triples.tolist(), got.tolist()):
            assert tuple(out) == hsv_reference(r, g, b), (r, g, b)

    def test_image_shape_matches_per_pixel(self, rng):
        img = rng.integers(0, 256, size=(7, 5, 3), dtype=np.uint8)
        hsv = rgb_to_hsv(img)
        assert hsv.shape == img.shape
        for y in range(7):
            for x in range(5):
                assert tuple(hsv[y, x]) == tuple(rgb_to_hsv(img[y, x]))

    @given(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255))
    @settings(max_examples=300, deadline=None)
    def test_ranges_hold(self, r, g, b):
        h, s, v = rgb_to_hsv(np.array([r, g, b], dtype=np.uint8))
        assert 0 <= h < 180
        assert 0 <= s <= 255
        assert v == max(r, g, b)


class TestHsvToRgb:
    def test_primary_round_trip(self):
        for rgb in [(255, 0, 0), (0, 255, 0), (0, 0, 255), (255, 255, 0),
                    (0, 255, 255), (10, 200, 30), (173, 173, 173)]:
            back = hsv_to_rgb(rgb_to_hsv(np.array(rgb, dtype=np.uint8)))
            assert np.max(np.abs(back.astype(int) - np.array(rgb))) <= 1

    def test_round_trip_hue_stability(self, rng):
        # saturated colors keep their hue within a half-degree after a cycle
        hsv = np.stack([
            rng.integers(0, 180, 500),
            rng.integers(150, 256, 500),
            rng.integers(150, 256, 500),
        ], axis=-1).astype(np.uint8)
        cycled = rgb_to_hsv(hsv_to_rgb(hsv))
        dh = (cycled[:, 0].astype(int) - hsv[:, 0].astype(int)) % 180
        dh = np.minimum(dh, 180 - dh)
        assert dh.max() <= 1


class TestThresholdHsv:
    def test_gate_selects_expected_pixels(self):
        img = np.zeros((2, 2, 3), dtype=np.uint8)
        img[0, 0] = (0, 200, 40)      # green, hue 60
        img[0, 1] = (200, 180, 0)     # yellow-ish
        img[1, 0] = (200, 200, 200)   # gray: s = 0 fails the gate
        img[1, 1] = (0, 40, 200)      # blue
        green = HsvRange((35, 100, 140), (85, 255, 255))
        got = threshold_hsv(img, green)
        assert got.tolist() == [[True, False], [False, False]]

    def test_value_floor_respected(self):
        img = np.zeros((1, 2, 3), dtype=np.uint8)
        img[0, 0] = (0, 139, 20)   # v = 139, just below the floor
        img[0, 1] = (0, 140, 20)
        gate = HsvRange((35, 100, 140), (85, 255, 255))
        assert threshold_hsv(img, gate).tolist() == [[False, True]]

    def test_bad_range_rejected(self):
        with pytest.raises(ValueError):
            HsvRange((100, 0, 0), (40, 255, 255))
        with pytest.raises(ValueError):
            HsvRange((0, 0, 0), (200, 255, 255))


class TestMaskOps:
    def test_area_intersection_union(self):
        a = np.zeros((4, 4), dtype=bool)
        b = np.zeros((4, 4), dtype=bool)
        a[:2] = True
        b[1:3] = True
        assert mask_area(a) == 8
        assert mask_area(mask_intersection(a, b)) == 4
        assert mask_area(mask_union(a, b)) == 12

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            mask_intersection(np.zeros((2, 2), bool), np.zeros((3, 2), bool))

    def test_as_rgb_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            as_rgb(np.zeros((4, 4), dtype=np.uint8))
        with pytest.raises(ValueError):
            as_rgb(np.zeros((4, 4, 4), dtype=np.uint8))


def _square(x0, y0, x1, y1):
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)


class TestRasterizePolygon:
    def test_full_square_fills_everything(self):
        mask = rasterize_polygon(_square(0, 0, 1, 1), 7, 5)
        assert mask.all() and mask.shape == (5, 7)

    def test_half_square(self):
        mask = rasterize_polygon(_square(0, 0, 0.5, 1), 4, 4)
        assert mask[:, :2].all() and not mask[:, 2:].any()

    def test_shared_edge_no_overlap_no_gap(self):
        left = rasterize_polygon(_square(0, 0, 0.5, 1), 5, 5)
        right = rasterize_polygon(_square(0.5, 0, 1, 1), 5, 5)
        assert not (left & right).any()
        assert (left | right).all()

    def test_vertex_on_scanline_keeps_even_parity(self):
        # diamond whose left/right vertices sit exactly on a center scanline
        poly = np.array([[0.5, 0.1], [0.9, 0.5], [0.5, 0.9], [0.1, 0.5]])
        mask = rasterize_polygon(poly, 10, 10)
        ref = rasterize_reference(poly, 10, 10)
        assert np.array_equal(mask, ref)

    def test_matches_reference_on_random_polygons(self, rng):
        for _ in range(25):
            n = int(rng.integers(3, 9))
            poly = rng.uniform(0.02, 0.98, size=(n, 2))
            got = rasterize_polygon(poly, 32, 32)
            ref = rasterize_reference(poly, 32, 32)
            assert np.array_equal(got, ref)

    def test_degenerate_rejected(self):
        with pytest.raises(DegeneratePolygon):
            rasterize_polygon(np.array([[0.1, 0.1], [0.9, 0.9]]), 8, 8)


class TestConnectedComponents:
    def test_diagonal_touch_is_one_component(self):
        m = np.array([[1, 0], [0, 1]], dtype=bool)
        labels, comps = connected_components(m)
        assert len(comps) == 1
        assert comps[0].area == 2

    def test_raster_order_labels(self):
        m = np.zeros((4, 8), dtype=bool)
        m[0, 6] = True          # first set pixel in raster order
        m[2:4, 0:2] = True      # larger blob, later start
        labels, comps = connected_components(m)
        assert labels[0, 6] == 1
        assert labels[2, 0] == 2
        assert [c.area for c in comps] == [1, 4]
        assert comps[0].bbox == (6, 0, 1, 1)
        assert comps[1].bbox == (0, 2, 2, 2)

    def test_empty_mask(self):
        labels, comps = connected_components(np.zeros((3, 3), dtype=bool))
        assert comps == []
        assert not labels.any()


class TestMorphology:
    def test_footprint_shapes(self):
        assert disc_footprint(0).tolist() == [[True]]
        assert disc_footprint(1).all() and disc_footprint(1).shape == (3, 3)
        fp2 = disc_footprint(2)
        assert fp2.sum() == 21  # 5x5 minus the four corners
        assert not fp2[0, 0] and fp2[0, 2] and fp2[1, 1]

    def test_solid_square_unchanged(self):
        m = np.zeros((14, 14), dtype=bool)
        m[2:12, 2:12] = True
        assert np.array_equal(morphological_open(m, 1), m)

    def test_one_pixel_line_removed(self):
        m = np.zeros((8, 12), dtype=bool)
        m[4, 2:10] = True
        assert not morphological_open(m, 1).any()

    def test_matches_brute_force(self, rng):
        for radius in (1, 2):
            fp = disc_footprint(radius)
            for _ in range(6):
                m = rng.random((16, 16)) < 0.55
                got = morphological_open(m, radius)
                assert np.array_equal(got, opening_reference(m, fp))

    def test_idempotent(self, rng):
        for _ in range(6):
            m = rng.random((20, 20)) < 0.5
            once = morphological_open(m, 1)
            assert np.array_equal(morphological_open(once, 1), once)

    def test_radius_zero_is_identity(self, rng):
        m = rng.random((9, 9)) < 0.5
        assert np.array_equal(morphological_open(m, 0), m)


class TestMaskToPolygons:
    def test_single_pixel_yields_unit_square(self):
        m = np.zeros((4, 4), dtype=bool)
        m[1, 2] = True
        polys = mask_to_polygons(m)
        assert len(polys) == 1
        got = {tuple(p) for p in (polys[0] * 4).tolist()}
        assert got == {(2, 1), (3, 1), (3, 2), (2, 2)}

    def test_diagonal_pinch_round_trip(self):
        m = np.array([[1, 0], [0, 1]], dtype=bool)
        polys = mask_to_polygons(m)
        assert len(polys) == 1
        back = rasterize_polygon(polys[0], 2, 2)
        assert np.array_equal(back, m)

    def test_round_trip_fills_holes_only(self, rng):
        for _ in range(10):
            m = ndimage.binary_dilation(rng.random((24, 24)) < 0.12, np.ones((2, 2), bool))
            if not m.any():
                continue
            polys = mask_to_polygons(m)
            back = np.zeros_like(m)
            for p in polys:
                back |= rasterize_polygon(p, 24, 24)
            expected = ndimage.binary_fill_holes(m)
            assert np.array_equal(back, expected)

    def test_polygon_count_matches_components(self, rng):
        m = rng.random((30, 30)) < 0.05
        _, comps = connected_components(m)
        assert len(mask_to_polygons(m)) == len(comps)

    def test_coordinates_normalized(self):
        m = np.zeros((6, 10), dtype=bool)
        m[3:5, 7:10] = True
        (poly,) = mask_to_polygons(m)
        assert poly.min() >= 0.0 and poly.max() <= 1.0
