"""Frame standardization and seeded augmentation.

standardize() pads to square with the neutral gray used by the acquisition
software and resizes to the model input size. augment() applies crop,
rotation, flips, color jitter and blur in a fixed order, with every random
draw taken from one seeded generator, so a variant is a pure function of
(image, params).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .imaging import as_rgb, hsv_to_rgb, rgb_to_hsv

PAD_FILL = (173, 173, 173)
TARGET_SIZE = 224


def _round_u8(arr: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(arr + 0.5), 0, 255).astype(np.uint8)


def pad_to_square(img: np.ndarray, fill: tuple[int, int, int] = PAD_FILL) -> np.ndarray:
    """Pad the short side to S = max(w, h), content centered.

    An odd pad total puts the extra row at the bottom and the extra column
    at the right.
    """
    rgb = as_rgb(img)
    h, w = rgb.shape[:2]
    s = max(h, w)
    if h == s and w == s:
        return rgb.copy()
    out = np.empty((s, s, 3), dtype=np.uint8)
    out[:] = np.asarray(fill, dtype=np.uint8)
    top = (s - h) // 2
    left = (s - w) // 2
    out[top:top + h, left:left + w] = rgb
    return out


def resize_bilinear(img: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resize with half-pixel center alignment and edge clamping.

    Resizing to the input dimensions returns the input unchanged.
    """
    rgb = as_rgb(img)
    ih, iw = rgb.shape[:2]
    if width < 1 or height < 1:
        raise ValueError("target dimensions must be positive")
    if (iw, ih) == (width, height):
        return rgb.copy()

    src = rgb.astype(np.float64)
    xs = (np.arange(width) + 0.5) * (iw / width) - 0.5
    ys = (np.arange(height) + 0.5) * (ih / height) - 0.5
    x0 = np.floor(xs).astype(int)
    y0 = np.floor(ys).astype(int)
    fx = (xs - x0)[None, :, None]
    fy = (ys - y0)[:, None, None]
    x0c = np.clip(x0, 0, iw - 1)
    x1c = np.clip(x0 + 1, 0, iw - 1)
    y0c = np.clip(y0, 0, ih - 1)
    y1c = np.clip(y0 + 1, 0, ih - 1)

    top = src[np.ix_(y0c, x0c)] * (1 - fx) + src[np.ix_(y0c, x1c)] * fx
    bot = src[np.ix_(y1c, x0c)] * (1 - fx) + src[np.ix_(y1c, x1c)] * fx
    return _round_u8(top * (1 - fy) + bot * fy)


def standardize(img: np.ndarray, size: int = TARGET_SIZE,
                fill: tuple[int, int, int] = PAD_FILL) -> np.ndarray:
    """Pad to square then resize to (size, size)."""
    return resize_bilinear(pad_to_square(img, fill), size, size)


@dataclass(frozen=True)
class AugmentParams:
    """Bounds for each augmentation step plus the seed every draw comes from.

    crop_scale bounds the area fraction kept by the random resized crop;
    rotation_max_deg bounds the uniform angle draw; brightness, contrast and
    saturation are +/- relative amplitudes; hue_shift is the largest hue
    displacement in half-degrees; blur_sigma bounds the Gaussian sigma draw.
    Setting a field to its identity value (interval (1, 1), amplitude 0,
    False) disables that step exactly.
    """

    crop_scale: tuple[float, float] = (0.8, 1.0)
    rotation_max_deg: float = 360.0
    hflip: bool = True
    vflip: bool = True
    brightness: float = 0.2
    contrast: float = 0.2
    saturation: float = 0.2
    hue_shift: int = 10
    blur_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        lo, hi = self.crop_scale
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError(f"crop_scale must satisfy 0 < lo <= hi <= 1, got {self.crop_scale}")
        if not (0.0 <= self.rotation_max_deg <= 360.0):
            raise ValueError("rotation_max_deg must lie in [0, 360]")
        for name in ("brightness", "contrast", "saturation"):
            if not (0.0 <= getattr(self, name) < 1.0):
                raise ValueError(f"{name} amplitude must lie in [0, 1)")
        if not (0 <= int(self.hue_shift) < 90):
            raise ValueError("hue_shift must lie in [0, 90) half-degrees")
        if self.blur_sigma < 0:
            raise ValueError("blur_sigma must be >= 0")
        if int(self.seed) < 0:
            raise ValueError("seed must be non-negative")


def _sample_bilinear(rgb: np.ndarray, sx: np.ndarray, sy: np.ndarray,
                     fill: tuple[int, int, int]) -> np.ndarray:
    """Bilinear sample at float coordinates; out-of-bounds reads the fill color."""
    h, w = rgb.shape[:2]
    src = rgb.astype(np.float64)
    fillv = np.asarray(fill, dtype=np.float64)

    x0 = np.floor(sx).astype(int)
    y0 = np.floor(sy).astype(int)
    fx = (sx - x0)[..., None]
    fy = (sy - y0)[..., None]

    def at(xi, yi):
        inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        vals = np.broadcast_to(fillv, xi.shape + (3,)).copy()
        vals[inside] = src[yi[inside], xi[inside]]
        return vals

    top = at(x0, y0) * (1 - fx) + at(x0 + 1, y0) * fx
    bot = at(x0, y0 + 1) * (1 - fx) + at(x0 + 1, y0 + 1) * fx
    return _round_u8(top * (1 - fy) + bot * fy)


def _rotate(rgb: np.ndarray, angle_deg: float, fill: tuple[int, int, int]) -> np.ndarray:
    h, w = rgb.shape[:2]
    theta = math.radians(angle_deg)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    ca, sa = math.cos(theta), math.sin(theta)
    sx = ca * (xx - cx) + sa * (yy - cy) + cx
    sy = -sa * (xx - cx) + ca * (yy - cy) + cy
    return _sample_bilinear(rgb, sx, sy, fill)


def _color_jitter(rgb: np.ndarray, fb: float, fc: float, fs: float, hshift: int) -> np.ndarray:
    out = rgb.astype(np.float64)
    if fb != 1.0:
        out = out * fb
    if fc != 1.0:
        center = out.mean()
        out = (out - center) * fc + center
    if fs != 1.0:
        luma = out @ np.array([0.299, 0.587, 0.114])
        out = luma[..., None] + (out - luma[..., None]) * fs
    arr = _round_u8(out)
    if hshift != 0:
        hsv = rgb_to_hsv(arr).astype(np.int64)
        hsv[..., 0] = (hsv[..., 0] + hshift) % 180
        arr = hsv_to_rgb(hsv)
    return arr


def augment(img: np.ndarray, params: AugmentParams) -> np.ndarray:
    """One augmentation variant: crop, rotate, flip, jitter, blur, in that order.

    Output dimensions equal input dimensions. All draws happen in a fixed
    order regardless of which steps are enabled, so the variant depends only
    on (img, params).
    """
    rgb = as_rgb(img)
    h, w = rgb.shape[:2]
    rng = np.random.default_rng(int(params.seed))

    scale = rng.uniform(params.crop_scale[0], params.crop_scale[1])
    side = math.sqrt(scale)
    cw = min(w, max(1, int(math.floor(w * side + 0.5))))
    ch = min(h, max(1, int(math.floor(h * side + 0.5))))
    x0 = int(rng.integers(0, w - cw + 1))
    y0 = int(rng.integers(0, h - ch + 1))
    angle = float(rng.uniform(0.0, params.rotation_max_deg))
    flip_h = bool(rng.random() < 0.5)
    flip_v = bool(rng.random() < 0.5)
    fb = float(rng.uniform(1.0 - params.brightness, 1.0 + params.brightness))
    fc = float(rng.uniform(1.0 - params.contrast, 1.0 + params.contrast))
    fs = float(rng.uniform(1.0 - params.saturation, 1.0 + params.saturation))
    hshift = int(rng.integers(-params.hue_shift, params.hue_shift + 1))
    sigma = float(rng.uniform(0.0, params.blur_sigma))

    out = rgb
    if (cw, ch) != (w, h):
        out = resize_bilinear(out[y0:y0 + ch, x0:x0 + cw], w, h)
    if angle != 0.0:
        out = _rotate(out, angle, PAD_FILL)
    if params.hflip and flip_h:
        out = out[:, ::-1]
    if params.vflip and flip_v:
        out = out[::-1, :]
    out = _color_jitter(out, fb, fc, fs, hshift)
    if sigma > 1e-3:
        blurred = ndimage.gaussian_filter(out.astype(np.float64), sigma=(sigma, sigma, 0.0),
                                          mode="nearest")
        out = _round_u8(blurred)
    return np.ascontiguousarray(out)


def variant_seed(base_seed: int, image_id: str, k: int) -> int:
    """Stable per-variant seed: salted content hash, never Python's hash()."""
    digest = hashlib.blake2b(f"{image_id}:{k}".encode(), digest_size=8).digest()
    return (int(base_seed) + int.from_bytes(digest, "big")) % (1 << 63)


def expand_fivefold(items, base_seed: int = 0, params: AugmentParams | None = None,
                    copies: int = 5):
    """Expand (image_id, image) pairs into `copies` augmented variants each.

    Variant ids are `<id>_aug<k>`. The draw seed for a variant depends only
    on (base_seed, image_id, k), so regenerating any subset reproduces the
    same pixels.
    """
    template = params if params is not None else AugmentParams()
    out = []
    for image_id, img in items:
        for k in range(copies):
            p = replace(template, seed=variant_seed(base_seed, image_id, k))
            out.append((f"{image_id}_aug{k}", augment(img, p)))
    return out
