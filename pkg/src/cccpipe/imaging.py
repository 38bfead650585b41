"""Pixel-level primitives: color conversion, masks, polygons, morphology.

Integer HSV convention used throughout the package: hue is in half-degrees
in [0, 180), saturation and value in [0, 255]. Value is max(r, g, b); a
pixel is achromatic exactly when max == min, in which case h = 0 and s = 0.
All rounding is round-half-up on exact integer arithmetic, so conversions
are reproducible bit for bit across platforms.

Mask/polygon conventions: masks are 2-D bool arrays indexed [row, col];
polygon vertices are (x, y) pairs normalized to [0, 1] by image width and
height. Rasterization samples pixel centers (col + 0.5, row + 0.5) with the
even-odd rule; a center exactly on a boundary belongs to the span on its
right/below (half-open spans), so butted polygons never double-cover.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegeneratePolygon, DimensionMismatch

HUE_STEPS = 180  # half-degree hue wheel


def as_rgb(img: np.ndarray) -> np.ndarray:
    """Validate and return an (H, W, 3) uint8 RGB array."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) RGB array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    if arr.dtype != np.uint8:
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"RGB image must be integer-typed, got {arr.dtype}")
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError("RGB values must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


def as_mask(mask: np.ndarray) -> np.ndarray:
    """Validate and return a 2-D bool mask."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D mask, got shape {arr.shape}")
    return arr.astype(bool, copy=False)


def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """Convert 8-bit RGB to integer HSV (see module docstring for ranges).

    Accepts a single (r, g, b) triple or any (..., 3) array and returns the
    same shape. Hue ties between channels resolve in r, g, b priority order,
    so (255, 255, 0) reports the red-sector hue 30 rather than 90.
    """
    arr = np.asarray(rgb)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[-1] != 3:
        raise ValueError(f"expected triples on the last axis, got shape {arr.shape}")
    arr = arr.astype(np.int64)
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]

    v = np.maximum(np.maximum(r, g), b)
    delta = v - np.minimum(np.minimum(r, g), b)

    # s = round_half_up(255 * delta / v); exact via (2*255*delta + v) // (2*v)
    s = np.where(v > 0, (510 * delta + v) // np.maximum(2 * v, 1), 0)

    is_r = r == v
    is_g = (g == v) & ~is_r
    # numerator of hue * delta, in half-degree units
    num = np.where(
        is_r,
        30 * (g - b),
        np.where(is_g, 30 * (b - r) + 60 * delta, 30 * (r - g) + 120 * delta),
    )
    num = np.where(num < 0, num + HUE_STEPS * delta, num)
    h = np.where(delta > 0, (2 * num + delta) // np.maximum(2 * delta, 1), 0) % HUE_STEPS

    out = np.stack([h, s, v], axis=-1).astype(np.uint8)
    return out[0] if single else out


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    """Inverse of rgb_to_hsv up to rounding. Same shape conventions."""
    arr = np.asarray(hsv)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[-1] != 3:
        raise ValueError(f"expected triples on the last axis, got shape {arr.shape}")
    h, s, v = (arr[..., i].astype(np.float64) for i in range(3))

    c = v * s / 255.0
    sector = h * 2.0 / 60.0  # half-degrees to 60-degree sectors
    x = c * (1.0 - np.abs(sector % 2.0 - 1.0))
    m = v - c
    sec = np.floor(sector).astype(np.int64) % 6

    zeros = np.zeros_like(c)
    r1 = np.select([sec == 0, sec == 1, sec == 2, sec == 3, sec == 4, sec == 5],
                   [c, x, zeros, zeros, x, c])
    g1 = np.select([sec == 0, sec == 1, sec == 2, sec == 3, sec == 4, sec == 5],
                   [x, c, c, x, zeros, zeros])
    b1 = np.select([sec == 0, sec == 1, sec == 2, sec == 3, sec == 4, sec == 5],
                   [zeros, zeros, x, c, c, x])

    out = np.stack([r1 + m, g1 + m, b1 + m], axis=-1)
    out = np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)
    return out[0] if single else out


@dataclass(frozen=True)
class HsvRange:
    """Inclusive HSV gate: lower <= (h, s, v) <= upper, componentwise."""

    lower: tuple[int, int, int]
    upper: tuple[int, int, int]

    def __post_init__(self) -> None:
        lo, hi = self.lower, self.upper
        if len(lo) != 3 or len(hi) != 3:
            raise ValueError("bounds must be (h, s, v) triples")
        if not (0 <= lo[0] <= hi[0] < HUE_STEPS):
            raise ValueError(f"hue bounds out of range: {lo[0]}..{hi[0]}")
        for k in (1, 2):
            if not (0 <= lo[k] <= hi[k] <= 255):
                raise ValueError(f"bounds component {k} out of range: {lo[k]}..{hi[k]}")


def threshold_hsv(img: np.ndarray, gate: HsvRange) -> np.ndarray:
    """Boolean mask of pixels whose HSV triple lies inside the gate."""
    hsv = rgb_to_hsv(as_rgb(img)).astype(np.int64)
    lo = np.asarray(gate.lower)
    hi = np.asarray(gate.upper)
    return np.all((hsv >= lo) & (hsv <= hi), axis=-1)


def mask_area(mask: np.ndarray) -> int:
    return int(np.count_nonzero(as_mask(mask)))


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"mask shapes differ: {a.shape} vs {b.shape}")


def mask_intersection(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = as_mask(a), as_mask(b)
    _check_same_shape(a, b)
    return a & b


def mask_union(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = as_mask(a), as_mask(b)
    _check_same_shape(a, b)
    return a | b


def rasterize_polygon(points: np.ndarray, width: int, height: int) -> np.ndarray:
    """Fill a polygon given in normalized coordinates onto a (height, width) mask.

    Even-odd rule over pixel centers. Horizontal edges never cross a center
    scanline (centers sit at half-integers after scaling only if vertices do,
    and the span rule is half-open), so crossing counts are always even.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
        raise DegeneratePolygon(f"polygon needs at least 3 (x, y) vertices, got shape {pts.shape}")
    if width < 1 or height < 1:
        raise ValueError("target dimensions must be positive")

    xs = pts[:, 0] * width
    ys = pts[:, 1] * height
    x2 = np.roll(xs, -1)
    y2 = np.roll(ys, -1)
    ylo = np.minimum(ys, y2)
    yhi = np.maximum(ys, y2)

    mask = np.zeros((height, width), dtype=bool)
    for row in range(height):
        yc = row + 0.5
        sel = (ylo <= yc) & (yc < yhi)
        if not sel.any():
            continue
        t = (yc - ys[sel]) / (y2[sel] - ys[sel])
        crossings = np.sort(xs[sel] + t * (x2[sel] - xs[sel]))
        for k in range(0, len(crossings) - 1, 2):
            a, b = crossings[k], crossings[k + 1]
            first = int(np.ceil(a - 0.5))          # first center >= a
            last = int(np.ceil(b - 0.5)) - 1       # last center < b
            if last < first:
                continue
            mask[row, max(first, 0):min(last, width - 1) + 1] = True
    return mask


_EIGHT = np.ones((3, 3), dtype=int)


@dataclass(frozen=True)
class Component:
    """One connected component: dense label, pixel count, (x, y, w, h) box."""

    label: int
    area: int
    bbox: tuple[int, int, int, int]


def connected_components(mask: np.ndarray) -> tuple[np.ndarray, list[Component]]:
    """8-connected labeling with labels dense from 1 in raster-scan order.

    Raster order means component 1 contains the first set pixel scanning
    rows top to bottom, columns left to right; this keeps downstream output
    independent of labeling library internals.
    """
    m = as_mask(mask)
    raw, n = ndimage.label(m, structure=_EIGHT)
    if n == 0:
        return raw.astype(np.int32), []

    flat = raw.ravel()
    nz = np.flatnonzero(flat)
    uniq, first_idx = np.unique(flat[nz], return_index=True)
    order = np.argsort(first_idx)
    remap = np.zeros(n + 1, dtype=np.int32)
    remap[uniq[order]] = np.arange(1, n + 1, dtype=np.int32)
    labels = remap[raw]

    comps = []
    for i, sl in enumerate(ndimage.find_objects(labels), start=1):
        ysl, xsl = sl
        area = int(np.count_nonzero(labels[sl] == i))
        comps.append(Component(
            label=i,
            area=area,
            bbox=(int(xsl.start), int(ysl.start), int(xsl.stop - xsl.start), int(ysl.stop - ysl.start)),
        ))
    return labels, comps


def disc_footprint(radius: int) -> np.ndarray:
    """Rounded-disc structuring element: dx^2 + dy^2 <= (radius + 0.5)^2.

    Radius 1 therefore gives the full 3x3 block, which leaves any solid
    rectangle of at least 3x3 untouched by opening.
    """
    r = int(radius)
    if r < 0:
        raise ValueError("radius must be >= 0")
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    return (xx * xx + yy * yy) <= (r + 0.5) ** 2


def morphological_open(mask: np.ndarray, radius: int = 1) -> np.ndarray:
    """Erosion then dilation with a disc footprint; pixels beyond the border
    count as background."""
    m = as_mask(mask)
    if radius == 0:
        return m.copy()
    fp = disc_footprint(radius)
    eroded = ndimage.binary_erosion(m, structure=fp, border_value=0)
    return ndimage.binary_dilation(eroded, structure=fp, border_value=0)


_TURN_LEFT = {"E": "N", "N": "W", "W": "S", "S": "E"}
_TURN_RIGHT = {"E": "S", "S": "W", "W": "N", "N": "E"}
_STEP = {"E": (1, 0), "S": (0, 1), "W": (-1, 0), "N": (0, -1)}
# Pixel just ahead-left / ahead-right of a lattice vertex, per heading.
_AHEAD_LEFT = {"E": (0, -1), "S": (0, 0), "W": (-1, 0), "N": (-1, -1)}
_AHEAD_RIGHT = {"E": (0, 0), "S": (-1, 0), "W": (-1, -1), "N": (0, -1)}


def _trace_outer_contour(mask: np.ndarray) -> list[tuple[int, int]]:
    """Walk the outer pixel-edge boundary of one connected region.

    Vertices are lattice points in pixel units, clockwise with the region on
    the right. The left-hand turn priority makes the walk squeeze through
    diagonal pinches, so 8-connected regions stay a single loop and the
    rasterized loop reproduces the region exactly (holes excepted).
    """
    ys, xs = np.nonzero(mask)
    y0 = int(ys.min())
    x0 = int(xs[ys == y0].min())
    h, w = mask.shape
    pad = np.zeros((h + 2, w + 2), dtype=bool)
    pad[1:-1, 1:-1] = mask

    verts: list[tuple[int, int]] = []
    v = (x0, y0)
    d = "E"
    while True:
        verts.append(v)
        step = _STEP[d]
        v = (v[0] + step[0], v[1] + step[1])
        al = _AHEAD_LEFT[d]
        ar = _AHEAD_RIGHT[d]
        if pad[v[1] + al[1] + 1, v[0] + al[0] + 1]:
            d = _TURN_LEFT[d]
        elif pad[v[1] + ar[1] + 1, v[0] + ar[0] + 1]:
            pass  # straight on
        else:
            d = _TURN_RIGHT[d]
        if v == (x0, y0) and d == "E":
            break

    # drop collinear vertices, keep direction changes only
    out = []
    n = len(verts)
    for i in range(n):
        px, py = verts[(i - 1) % n]
        cx, cy = verts[i]
        nx, ny = verts[(i + 1) % n]
        if (cx - px, cy - py) != (nx - cx, ny - cy):
            out.append((cx, cy))
    return out


def mask_to_polygons(mask: np.ndarray) -> list[np.ndarray]:
    """Outer boundary polygon of every 8-connected component, normalized.

    One polygon per component, in component raster order. Rasterizing the
    result reproduces each component exactly except interior holes, which
    the outer contour fills.
    """
    m = as_mask(mask)
    labels, comps = connected_components(m)
    h, w = m.shape
    polys = []
    for comp in comps:
        verts = _trace_outer_contour(labels == comp.label)
        polys.append(np.asarray(verts, dtype=np.float64) / [w, h])
    return polys
