"""Inference backends behind two small call contracts.

A classifier exposes classify(img) -> ClusterPrediction on a standardized
224x224 RGB frame; a segmenter exposes segment(img) -> [InstancePrediction].
The classify()/segment() wrappers enforce the contracts: input shape checks,
confidence ordering, boxes recomputed tight around masks.

Backends: constant stubs, digest-keyed lookup/echo backends for harness
work (they key on the pixel content of the standardized frame, so they act
as a perfect model without any runtime), a classical brightfield pipeline
(Otsu threshold, contrast gate, opening, connected components, convexity
score), and a client for external ONNX models that degrades to
BackendUnavailable when the runtime or the asset is missing.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .dataset import CLUSTER, NON_CLUSTER
from .errors import BackendUnavailable, ShapeMismatch
from .imaging import as_rgb, connected_components, morphological_open

MODEL_INPUT_SIZE = 224


@dataclass(frozen=True)
class ClusterPrediction:
    """Binary cluster call with the cluster-class probability as score."""

    label: str
    score: float

    def __post_init__(self) -> None:
        if self.label not in (CLUSTER, NON_CLUSTER):
            raise ValueError(f"unknown label {self.label!r}")
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must lie in [0, 1], got {self.score}")


def prediction_from_probability(p_cluster: float) -> ClusterPrediction:
    label = CLUSTER if p_cluster >= 0.5 else NON_CLUSTER
    return ClusterPrediction(label=label, score=float(p_cluster))


@dataclass(frozen=True)
class InstancePrediction:
    """One segmented instance: mask, tight box (x, y, w, h), confidence."""

    mask: np.ndarray
    box: tuple[int, int, int, int]
    confidence: float
    class_id: int = 0


def image_digest(img: np.ndarray) -> str:
    arr = np.ascontiguousarray(as_rgb(img))
    h = hashlib.blake2b(digest_size=16)
    h.update(str(arr.shape).encode())
    h.update(arr.tobytes())
    return h.hexdigest()


def classify(img: np.ndarray, backend) -> ClusterPrediction:
    """Contract-enforcing wrapper around backend.classify."""
    rgb = as_rgb(img)
    if rgb.shape[:2] != (MODEL_INPUT_SIZE, MODEL_INPUT_SIZE):
        raise ShapeMismatch(
            f"classifier input must be {MODEL_INPUT_SIZE}x{MODEL_INPUT_SIZE}, "
            f"got {rgb.shape[1]}x{rgb.shape[0]}")
    pred = backend.classify(rgb)
    if not isinstance(pred, ClusterPrediction):
        raise TypeError("backend.classify must return a ClusterPrediction")
    return pred


def tight_box(mask: np.ndarray) -> tuple[int, int, int, int]:
    ys, xs = np.nonzero(mask)
    return (int(xs.min()), int(ys.min()),
            int(xs.max() - xs.min() + 1), int(ys.max() - ys.min() + 1))


def segment(img: np.ndarray, backend) -> list[InstancePrediction]:
    """Contract-enforcing wrapper: drops empty masks, recomputes tight boxes,
    returns instances in descending confidence (stable)."""
    rgb = as_rgb(img)
    raw = backend.segment(rgb)
    out = []
    for inst in raw:
        mask = np.asarray(inst.mask, dtype=bool)
        if mask.shape != rgb.shape[:2]:
            raise ShapeMismatch(
                f"instance mask {mask.shape} does not match image {rgb.shape[:2]}")
        if not mask.any():
            continue
        out.append(InstancePrediction(mask=mask, box=tight_box(mask),
                                      confidence=float(inst.confidence),
                                      class_id=int(inst.class_id)))
    return sorted(out, key=lambda p: -p.confidence)


class StubClassifier:
    """Always answers the same; handy for plumbing tests."""

    def __init__(self, label: str = NON_CLUSTER, score: float = 0.0):
        self._pred = ClusterPrediction(label=label, score=score)

    def classify(self, img: np.ndarray) -> ClusterPrediction:
        return self._pred


class LookupClassifier:
    """Digest-keyed oracle classifier: pixel content in, stored label out."""

    def __init__(self, table: dict[str, str], default: ClusterPrediction | None = None):
        self._table = dict(table)
        self._default = default

    @classmethod
    def from_pairs(cls, pairs) -> "LookupClassifier":
        """pairs: iterable of (image, label)."""
        table = {image_digest(img): label for img, label in pairs}
        return cls(table)

    def classify(self, img: np.ndarray) -> ClusterPrediction:
        label = self._table.get(image_digest(img))
        if label is None:
            if self._default is None:
                raise KeyError("image not present in the lookup table")
            return self._default
        return ClusterPrediction(label=label, score=1.0 if label == CLUSTER else 0.0)


class EchoSegmenter:
    """Digest-keyed oracle segmenter: returns the stored masks, confidence 1."""

    def __init__(self):
        self._table: dict[str, list[np.ndarray]] = {}

    def add(self, img: np.ndarray, masks) -> None:
        self._table[image_digest(img)] = [np.asarray(m, dtype=bool) for m in masks]

    def segment(self, img: np.ndarray) -> list[InstancePrediction]:
        masks = self._table.get(image_digest(img), [])
        out = []
        for m in masks:
            if not m.any():
                continue
            out.append(InstancePrediction(mask=m, box=tight_box(m), confidence=1.0))
        return out


def _otsu_threshold(gray: np.ndarray) -> int | None:
    """Between-class-variance argmax; None for a constant image."""
    hist = np.bincount(gray.ravel(), minlength=256).astype(np.float64)
    total = gray.size
    w0 = np.cumsum(hist)[:-1]
    w1 = total - w0
    mu = np.cumsum(hist * np.arange(256))[:-1]
    mu_total = float((hist * np.arange(256)).sum())
    valid = (w0 > 0) & (w1 > 0)
    if not valid.any():
        return None
    mu0 = np.where(valid, mu / np.maximum(w0, 1), 0.0)
    mu1 = np.where(valid, (mu_total - mu) / np.maximum(w1, 1), 0.0)
    between = np.where(valid, w0 * w1 * (mu0 - mu1) ** 2, -1.0)
    return int(np.argmax(between))


def _luminance(img: np.ndarray) -> np.ndarray:
    rgb = as_rgb(img).astype(np.int64)
    s = rgb[..., 0] + rgb[..., 1] + rgb[..., 2]
    return ((2 * s + 3) // 6).astype(np.uint8)  # round-half-up of s / 3


def classical_fallback_segment(img: np.ndarray, min_area: int = 25,
                               min_contrast: float = 30.0,
                               open_radius: int = 1) -> list[InstancePrediction]:
    """Brightfield segmentation without a learned model.

    Otsu threshold on luminance, dark side as foreground, rejected outright
    when foreground/background contrast is below min_contrast; then one
    opening, 8-connected components, and an area floor. Confidence is the
    component area over the largest component area.
    """
    gray = _luminance(img)
    t = _otsu_threshold(gray)
    if t is None:
        return []
    fg = gray <= t
    if not fg.any() or fg.all():
        return []
    contrast = float(gray[~fg].mean()) - float(gray[fg].mean())
    if contrast < min_contrast:
        return []
    fg = morphological_open(fg, open_radius)
    labels, comps = connected_components(fg)
    comps = [c for c in comps if c.area >= min_area]
    if not comps:
        return []
    biggest = max(c.area for c in comps)
    out = []
    for c in comps:
        mask = labels == c.label
        out.append(InstancePrediction(mask=mask, box=c.bbox,
                                      confidence=c.area / biggest))
    return sorted(out, key=lambda p: -p.confidence)


class ClassicalSegmenter:
    def __init__(self, min_area: int = 25, min_contrast: float = 30.0,
                 open_radius: int = 1):
        self.min_area = min_area
        self.min_contrast = min_contrast
        self.open_radius = open_radius

    def segment(self, img: np.ndarray) -> list[InstancePrediction]:
        return classical_fallback_segment(img, self.min_area, self.min_contrast,
                                          self.open_radius)


def _solidity(mask: np.ndarray) -> float:
    """Pixel area over convex hull area of pixel centers, clipped to 1."""
    pts = np.column_stack(np.nonzero(mask))[:, ::-1].astype(np.float64)
    if len(pts) < 4:
        return 1.0
    try:
        hull = ConvexHull(pts)
    except QhullError:
        return 1.0
    if hull.volume <= 0:
        return 1.0
    return min(1.0, float(np.count_nonzero(mask)) / hull.volume)


class ClassicalClusterClassifier:
    """Convexity-based cluster call on the classical segmentation.

    Single cells segment as nearly convex blobs; touching cells leave
    concave necks, so the solidity of the largest component separates the
    two. The score is a logistic squash of the solidity margin, gated by a
    minimum component area.
    """

    def __init__(self, solidity_threshold: float = 0.965, width: float = 0.01,
                 min_cluster_area: int = 150, segmenter: ClassicalSegmenter | None = None):
        self.solidity_threshold = solidity_threshold
        self.width = width
        self.min_cluster_area = min_cluster_area
        self._segmenter = segmenter or ClassicalSegmenter()

    def classify(self, img: np.ndarray) -> ClusterPrediction:
        instances = segment(img, self._segmenter)
        if not instances:
            return prediction_from_probability(0.01)
        largest = max(instances, key=lambda p: int(np.count_nonzero(p.mask)))
        area = int(np.count_nonzero(largest.mask))
        if area < self.min_cluster_area:
            return prediction_from_probability(0.02)
        s = _solidity(largest.mask)
        p = 1.0 / (1.0 + math.exp((s - self.solidity_threshold) / self.width))
        return prediction_from_probability(p)


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max())
    return e / e.sum()


class OnnxClassifier:
    """Client for an external 2-class model: input 1x3x224x224 float32 in
    [0, 1], output two scores (softmax applied here), index 1 = cluster."""

    def __init__(self, model_path: str | Path):
        try:
            import onnxruntime as ort
        except ImportError as exc:
            raise BackendUnavailable("onnxruntime is not installed") from exc
        path = Path(model_path)
        if not path.is_file():
            raise BackendUnavailable(f"model asset not found: {path}")
        try:
            self._session = ort.InferenceSession(str(path),
                                                 providers=["CPUExecutionProvider"])
        except Exception as exc:
            raise BackendUnavailable(f"cannot load model {path}: {exc}") from exc
        self._input_name = self._session.get_inputs()[0].name

    def classify(self, img: np.ndarray) -> ClusterPrediction:
        rgb = as_rgb(img)
        x = rgb.astype(np.float32).transpose(2, 0, 1)[None] / 255.0
        scores = np.asarray(self._session.run(None, {self._input_name: x})[0]).ravel()
        if scores.size != 2:
            raise BackendUnavailable(f"expected 2 output scores, got {scores.size}")
        p = _softmax(scores.astype(np.float64))[1]
        return prediction_from_probability(float(p))


class OnnxSegmenter:
    """Client for an external instance model: output [N, H, W] mask scores in
    [0, 1] (thresholded at 0.5) plus [N] confidences."""

    def __init__(self, model_path: str | Path):
        try:
            import onnxruntime as ort
        except ImportError as exc:
            raise BackendUnavailable("onnxruntime is not installed") from exc
        path = Path(model_path)
        if not path.is_file():
            raise BackendUnavailable(f"model asset not found: {path}")
        try:
            self._session = ort.InferenceSession(str(path),
                                                 providers=["CPUExecutionProvider"])
        except Exception as exc:
            raise BackendUnavailable(f"cannot load model {path}: {exc}") from exc
        self._input_name = self._session.get_inputs()[0].name

    def segment(self, img: np.ndarray) -> list[InstancePrediction]:
        rgb = as_rgb(img)
        x = rgb.astype(np.float32).transpose(2, 0, 1)[None] / 255.0
        outputs = self._session.run(None, {self._input_name: x})
        mask_scores = np.asarray(outputs[0])
        confidences = np.asarray(outputs[1]).ravel() if len(outputs) > 1 \
            else np.ones(mask_scores.shape[0])
        out = []
        for i in range(mask_scores.shape[0]):
            mask = mask_scores[i] >= 0.5
            if not mask.any():
                continue
            out.append(InstancePrediction(mask=mask, box=tight_box(mask),
                                          confidence=float(confidences[i])))
        return out


def make_classifier(spec: str):
    """Build a classifier from a CLI spec string.

    Formats: 'classical', 'stub:<label>:<score>', 'onnx:<path>'.
    """
    if spec == "classical":
        return ClassicalClusterClassifier()
    if spec.startswith("stub:"):
        parts = spec.split(":")
        label = parts[1] if len(parts) > 1 and parts[1] else NON_CLUSTER
        score = float(parts[2]) if len(parts) > 2 else (1.0 if label == CLUSTER else 0.0)
        return StubClassifier(label=label, score=score)
    if spec.startswith("onnx:"):
        return OnnxClassifier(spec.split(":", 1)[1])
    raise ValueError(f"unknown classifier spec {spec!r}")


def make_segmenter(spec: str):
    """Build a segmenter from a CLI spec string: 'classical' or 'onnx:<path>'."""
    if spec == "classical":
        return ClassicalSegmenter()
    if spec.startswith("onnx:"):
        return OnnxSegmenter(spec.split(":", 1)[1])
    raise ValueError(f"unknown segmenter spec {spec!r}")
