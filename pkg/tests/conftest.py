"""Shared reference implementations used as independent oracles.

Everything here is written scalar-first and library-free on purpose: the
production code is vectorized numpy, the oracles are the dumbest correct
thing, and the tests assert the two agree.
"""

from __future__ import annotations

import math

import numpy as np
import pytest


def hsv_reference(r: int, g: int, b: int) -> tuple[int, int, int]:
    """Plain-float hexcone conversion to (half-degree hue, s, v).

    round-half-up throughout; value = max, achromatic pixels get h = s = 0,
    hue ties resolve in r, g, b priority order. Pure Python floats so a
    million calls still finish quickly.
    """
    v = max(r, g, b)
    mn = min(r, g, b)
    delta = v - mn
    if delta == 0:
        return 0, 0, v
    s = math.floor(255.0 * delta / v + 0.5)
    if r == v:
        hue_deg = 60.0 * (g - b) / delta
    elif g == v:
        hue_deg = 60.0 * (b - r) / delta + 120.0
    else:
        hue_deg = 60.0 * (r - g) / delta + 240.0
    if hue_deg < 0:
        hue_deg += 360.0
    h = math.floor(hue_deg / 2.0 + 0.5) % 180
    return h, s, v


def point_in_polygon_reference(x: float, y: float, pts: np.ndarray) -> bool:
    """Classic ray-casting parity test, leftward ray, with a half-open edge
    rule (an edge covers y when min <= y < max, a crossing at exactly x
    counts): odd number of crossings at or left of x means inside."""
    n = len(pts)
    count = 0
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        if min(y1, y2) <= y < max(y1, y2):
            t = (y - y1) / (y2 - y1)
            if x1 + t * (x2 - x1) <= x:
                count += 1
    return count % 2 == 1


def rasterize_reference(points: np.ndarray, width: int, height: int) -> np.ndarray:
    """Per-pixel-center polygon fill; quadratic and slow, only for tests."""
    pts = np.asarray(points, dtype=np.float64) * [width, height]
    out = np.zeros((height, width), dtype=bool)
    for row in range(height):
        for col in range(width):
            out[row, col] = point_in_polygon_reference(col + 0.5, row + 0.5, pts)
    return out


def erosion_reference(mask: np.ndarray, footprint: np.ndarray) -> np.ndarray:
    """Set-definition erosion: keep a pixel iff every footprint offset lands
    on a set pixel inside the image."""
    h, w = mask.shape
    r = footprint.shape[0] // 2
    offs = [(dy - r, dx - r) for dy in range(footprint.shape[0])
            for dx in range(footprint.shape[1]) if footprint[dy, dx]]
    out = np.zeros_like(mask, dtype=bool)
    for y in range(h):
        for x in range(w):
            keep = True
            for dy, dx in offs:
                yy, xx = y + dy, x + dx
                if not (0 <= yy < h and 0 <= xx < w and mask[yy, xx]):
                    keep = False
                    break
            out[y, x] = keep
    return out


def dilation_reference(mask: np.ndarray, footprint: np.ndarray) -> np.ndarray:
    h, w = mask.shape
    r = footprint.shape[0] // 2
    offs = [(dy - r, dx - r) for dy in range(footprint.shape[0])
            for dx in range(footprint.shape[1]) if footprint[dy, dx]]
    out = np.zeros_like(mask, dtype=bool)
    ys, xs = np.nonzero(mask)
    for y, x in zip(ys, xs):
        for dy, dx in offs:
            yy, xx = y + dy, x + dx
            if 0 <= yy < h and 0 <= xx < w:
                out[yy, xx] = True
    return out


def opening_reference(mask: np.ndarray, footprint: np.ndarray) -> np.ndarray:
    return dilation_reference(erosion_reference(mask, footprint), footprint)


def bilinear_reference(img: np.ndarray, width: int, height: int) -> np.ndarray:
    """Scalar half-pixel-center bilinear resize, float output (no rounding)."""
    src = img.astype(np.float64)
    ih, iw = src.shape[:2]
    out = np.zeros((height, width, src.shape[2]), dtype=np.float64)
    for row in range(height):
        sy = (row + 0.5) * (ih / height) - 0.5
        y0 = int(np.floor(sy))
        fy = sy - y0
        y0c = min(max(y0, 0), ih - 1)
        y1c = min(max(y0 + 1, 0), ih - 1)
        for col in range(width):
            sx = (col + 0.5) * (iw / width) - 0.5
            x0 = int(np.floor(sx))
            fx = sx - x0
            x0c = min(max(x0, 0), iw - 1)
            x1c = min(max(x0 + 1, 0), iw - 1)
            top = src[y0c, x0c] * (1 - fx) + src[y0c, x1c] * fx
            bot = src[y1c, x0c] * (1 - fx) + src[y1c, x1c] * fx
            out[row, col] = top * (1 - fy) + bot * fy
    return out


def iou_reference(a: np.ndarray, b: np.ndarray) -> float:
    inter = int(np.count_nonzero(a & b))
    union = int(np.count_nonzero(a | b))
    return 1.0 if union == 0 else inter / union


@pytest.fixture
def rng():
    return np.random.default_rng(17)
