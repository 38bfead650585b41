"""PNG load/save helpers for 8-bit RGB frames."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image

from .imaging import as_rgb


def load_rgb(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def save_rgb(path: str | Path, img: np.ndarray) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(as_rgb(img), mode="RGB").save(path, format="PNG")


def encode_png(img: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(as_rgb(img), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()
