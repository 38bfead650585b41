"""Evaluation metrics: confusion-table statistics, IoU, and mAP.

Instance matching is greedy in descending prediction confidence against the
highest-IoU unmatched ground truth and is decided once, independent of any
IoU threshold; a threshold only reclassifies matched pairs as TP or FP.
That makes AP non-increasing as the threshold rises, by construction.
AP itself uses 101-point interpolated precision, and mAP averages AP over
thresholds 0.50:0.05:0.95.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyEvaluation,
    InsufficientFolds,
    UndefinedMetric,
)
from .imaging import as_mask

DEFAULT_IOU_THRESHOLDS = tuple(i / 100 for i in range(50, 100, 5))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "tn", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class ClassificationMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float


def classification_metrics(c: ConfusionCounts) -> ClassificationMetrics:
    """Accuracy, precision, recall, F1 from one confusion table.

    Raises UndefinedMetric when a denominator is zero: no samples at all,
    no predicted positives (precision), or no actual positives (recall).
    F1 is defined as 0 in the measure-zero limit precision = recall = 0.
    """
    if c.total == 0:
        raise UndefinedMetric("empty confusion table")
    if c.tp + c.fp == 0:
        raise UndefinedMetric("precision undefined: no positive predictions")
    if c.tp + c.fn == 0:
        raise UndefinedMetric("recall undefined: no positive ground truth")
    accuracy = (c.tp + c.tn) / c.total
    precision = c.tp / (c.tp + c.fp)
    recall = c.tp / (c.tp + c.fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return ClassificationMetrics(accuracy, precision, recall, f1)


def confusion_from_labels(truths, preds, positive: str) -> ConfusionCounts:
    """Count a binary confusion table from parallel label sequences."""
    if len(truths) != len(preds):
        raise ValueError("truth and prediction sequences differ in length")
    tp = fp = tn = fn = 0
    for t, p in zip(truths, preds):
        if p == positive:
            if t == positive:
                tp += 1
            else:
                fp += 1
        else:
            if t == positive:
                fn += 1
            else:
                tn += 1
    return ConfusionCounts(tp, fp, tn, fn)


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """Mask intersection over union; two empty masks count as identical (1.0)."""
    a, b = as_mask(a), as_mask(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"mask shapes differ: {a.shape} vs {b.shape}")
    inter = int(np.count_nonzero(a & b))
    union = int(np.count_nonzero(a | b))
    return 1.0 if union == 0 else inter / union


def box_iou(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    ix = max(0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return 1.0 if union == 0 else inter / union


@dataclass(frozen=True)
class MatchedPrediction:
    """One prediction after matching: its confidence and best-match IoU.

    gt_index is None (and iou_value 0.0) for unmatched predictions.
    """

    confidence: float
    gt_index: int | None
    iou_value: float


def match_instances(predictions, ground_truths, *, use_boxes: bool = False) -> list[MatchedPrediction]:
    """Greedily assign predictions to ground truths, best IoU first.

    Predictions are visited in descending confidence (stable for ties); each
    claims the unmatched ground truth with the highest IoU, requiring actual
    overlap. The result lists every prediction in that visiting order.
    """
    order = sorted(range(len(predictions)), key=lambda i: -predictions[i].confidence)
    taken = [False] * len(ground_truths)
    out = []
    for i in order:
        pred = predictions[i]
        best_j = None
        best = 0.0
        for j, gt in enumerate(ground_truths):
            if taken[j]:
                continue
            if use_boxes:
                v = box_iou(pred.box, gt.box)
            else:
                v = iou(pred.mask, gt.mask)
            if v > best:
                best, best_j = v, j
        if best_j is not None:
            taken[best_j] = True
            out.append(MatchedPrediction(pred.confidence, best_j, best))
        else:
            out.append(MatchedPrediction(pred.confidence, None, 0.0))
    return out


def _ap_from_pool(matched: list[MatchedPrediction], n_gt: int, threshold: float) -> float:
    """101-point interpolated AP from a pooled, confidence-sorted match list."""
    if n_gt < 1:
        raise EmptyEvaluation("no ground-truth instances to evaluate")
    if not matched:
        return 0.0
    flags = np.array([m.gt_index is not None and m.iou_value >= threshold for m in matched])
    tp_cum = np.cumsum(flags)
    ranks = np.arange(1, len(matched) + 1)
    recalls = tp_cum / n_gt
    precisions = tp_cum / ranks
    envelope = np.maximum.accumulate(precisions[::-1])[::-1]
    levels = np.linspace(0.0, 1.0, 101)
    idx = np.searchsorted(recalls, levels, side="left")
    sampled = np.where(idx < len(matched), envelope[np.minimum(idx, len(matched) - 1)], 0.0)
    return float(sampled.mean())


def _pool_scenes(scenes, use_boxes: bool) -> tuple[list[MatchedPrediction], int]:
    """Match each (predictions, ground_truths) scene and pool by confidence."""
    pooled: list[MatchedPrediction] = []
    n_gt = 0
    for predictions, ground_truths in scenes:
        pooled.extend(match_instances(predictions, ground_truths, use_boxes=use_boxes))
        n_gt += len(ground_truths)
    pooled.sort(key=lambda m: -m.confidence)
    return pooled, n_gt


@dataclass(frozen=True)
class ApResult:
    iou_threshold: float
    ap: float
    n_predictions: int
    n_ground_truths: int


def average_precision(predictions, ground_truths, iou_threshold: float,
                      *, use_boxes: bool = False) -> ApResult:
    """Single-scene AP at one IoU threshold."""
    pooled, n_gt = _pool_scenes([(predictions, ground_truths)], use_boxes)
    ap = _ap_from_pool(pooled, n_gt, iou_threshold)
    return ApResult(iou_threshold, ap, len(predictions), n_gt)


def map_range(predictions, ground_truths, thresholds=DEFAULT_IOU_THRESHOLDS,
              *, use_boxes: bool = False) -> float:
    """Single-scene mean AP over the 0.50:0.05:0.95 threshold ladder."""
    pooled, n_gt = _pool_scenes([(predictions, ground_truths)], use_boxes)
    return float(np.mean([_ap_from_pool(pooled, n_gt, t) for t in thresholds]))


@dataclass(frozen=True)
class SegEvalReport:
    """Dataset-pooled segmentation quality over a threshold ladder."""

    thresholds: tuple[float, ...]
    mask_ap: tuple[float, ...]
    box_ap: tuple[float, ...]
    mask_map: float
    box_map: float
    mask_ap50: float
    box_ap50: float
    n_scenes: int
    n_ground_truths: int
    median_best_iou: float

    def to_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "mask_ap": list(self.mask_ap),
            "box_ap": list(self.box_ap),
            "mask_map": self.mask_map,
            "box_map": self.box_map,
            "mask_ap50": self.mask_ap50,
            "box_ap50": self.box_ap50,
            "n_scenes": self.n_scenes,
            "n_ground_truths": self.n_ground_truths,
            "median_best_iou": self.median_best_iou,
        }


def evaluate_segmentation(scenes, thresholds=DEFAULT_IOU_THRESHOLDS) -> SegEvalReport:
    """Pool (predictions, ground_truths) scenes and compute AP per threshold.

    median_best_iou is the median, over ground truths, of the best mask IoU
    any matched prediction achieved (0.0 for unmatched ground truths).
    """
    scenes = list(scenes)
    mask_pool, n_gt = _pool_scenes(scenes, use_boxes=False)
    if n_gt < 1:
        raise EmptyEvaluation("no ground-truth instances to evaluate")
    box_pool, _ = _pool_scenes(scenes, use_boxes=True)

    mask_ap = tuple(_ap_from_pool(mask_pool, n_gt, t) for t in thresholds)
    box_ap = tuple(_ap_from_pool(box_pool, n_gt, t) for t in thresholds)

    best_by_gt: list[float] = []
    for predictions, ground_truths in scenes:
        matched = match_instances(predictions, ground_truths)
        per_gt = {m.gt_index: m.iou_value for m in matched if m.gt_index is not None}
        best_by_gt.extend(per_gt.get(j, 0.0) for j in range(len(ground_truths)))

    return SegEvalReport(
        thresholds=tuple(thresholds),
        mask_ap=mask_ap,
        box_ap=box_ap,
        mask_map=float(np.mean(mask_ap)),
        box_map=float(np.mean(box_ap)),
        mask_ap50=mask_ap[0] if thresholds and thresholds[0] == 0.5 else
        _ap_from_pool(mask_pool, n_gt, 0.5),
        box_ap50=box_ap[0] if thresholds and thresholds[0] == 0.5 else
        _ap_from_pool(box_pool, n_gt, 0.5),
        n_scenes=len(scenes),
        n_ground_truths=n_gt,
        median_best_iou=float(np.median(best_by_gt)),
    )


@dataclass(frozen=True)
class FoldAggregate:
    """Mean and sample standard deviation of each metric across folds."""

    mean: ClassificationMetrics
    std: ClassificationMetrics
    n_folds: int


def aggregate_folds(fold_metrics) -> FoldAggregate:
    folds = list(fold_metrics)
    if len(folds) < 2:
        raise InsufficientFolds(f"need at least 2 folds, got {len(folds)}")
    names = ("accuracy", "precision", "recall", "f1")
    cols = {n: np.array([getattr(m, n) for m in folds], dtype=np.float64) for n in names}
    mean = ClassificationMetrics(*(float(cols[n].mean()) for n in names))
    std = ClassificationMetrics(*(float(cols[n].std(ddof=1)) for n in names))
    return FoldAggregate(mean=mean, std=std, n_folds=len(folds))


def render_metrics_table(rows: dict[str, ClassificationMetrics]) -> str:
    """Fixed-width text table: one row per entry, metric columns to 4 places."""
    names = ("accuracy", "precision", "recall", "f1")
    label_w = max([len(k) for k in rows] + [len("fold")])
    header = "  ".join(["fold".ljust(label_w)] + [n.rjust(9) for n in names])
    lines = [header, "-" * len(header)]
    for key, m in rows.items():
        vals = "  ".join(f"{getattr(m, n):9.4f}" for n in names)
        lines.append(f"{key.ljust(label_w)}  {vals}")
    return "\n".join(lines) + "\n"


def render_segeval_table(report: SegEvalReport) -> str:
    lines = ["threshold   mask AP    box AP", "-" * 30]
    for t, m, b in zip(report.thresholds, report.mask_ap, report.box_ap):
        lines.append(f"{t:9.2f}  {m:8.4f}  {b:8.4f}")
    lines.append("-" * 30)
    lines.append(f"mAP@0.5:0.95  mask {report.mask_map:.4f}  box {report.box_map:.4f}")
    lines.append(f"median best IoU {report.median_best_iou:.4f}  "
                 f"({report.n_ground_truths} instances, {report.n_scenes} scenes)")
    return "\n".join(lines) + "\n"
