"""Record catalog, stratified splits, and segmentation label files.

A manifest is JSONL, one record per line, with image paths stored exactly
as given (callers resolve relative paths against the manifest directory).
Segmentation labels use one line per instance: a class id followed by
normalized polygon coordinates x1 y1 x2 y2 ... to six decimals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InsufficientRecords, MalformedLine

CLUSTER = "cluster"
NON_CLUSTER = "non-cluster"
UNKNOWN = "unknown"
CLUSTER_LABELS = (CLUSTER, NON_CLUSTER, UNKNOWN)
PHENOTYPE_LABELS = ("RBC", "PLT", "WBC", "WBC+PLT")


@dataclass
class MultiChannelRecord:
    """One acquisition event: brightfield frame plus optional stain channels."""

    id: str
    brightfield: str
    cd61: str | None = None
    cd45: str | None = None
    cluster_label: str = UNKNOWN
    phenotype_label: str | None = None
    polygons: list[tuple[int, np.ndarray]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("record id must be non-empty")
        if not self.brightfield:
            raise ValueError("brightfield path must be present")
        if self.cluster_label not in CLUSTER_LABELS:
            raise ValueError(f"unknown cluster label {self.cluster_label!r}")
        if self.phenotype_label is not None:
            if self.phenotype_label not in PHENOTYPE_LABELS:
                raise ValueError(f"unknown phenotype label {self.phenotype_label!r}")
            if self.cluster_label != CLUSTER:
                raise ValueError("a phenotype label requires cluster_label == 'cluster'")


def record_to_json(rec: MultiChannelRecord) -> dict:
    out: dict = {"id": rec.id, "brightfield": rec.brightfield,
                 "cluster_label": rec.cluster_label}
    if rec.cd61 is not None:
        out["cd61"] = rec.cd61
    if rec.cd45 is not None:
        out["cd45"] = rec.cd45
    if rec.phenotype_label is not None:
        out["phenotype_label"] = rec.phenotype_label
    if rec.polygons:
        out["polygons"] = [
            {"class_id": cid, "points": np.asarray(pts, dtype=float).tolist()}
            for cid, pts in rec.polygons
        ]
    return out


def record_from_json(obj: dict) -> MultiChannelRecord:
    polygons = [
        (int(p["class_id"]), np.asarray(p["points"], dtype=np.float64))
        for p in obj.get("polygons", [])
    ]
    return MultiChannelRecord(
        id=obj["id"],
        brightfield=obj["brightfield"],
        cd61=obj.get("cd61"),
        cd45=obj.get("cd45"),
        cluster_label=obj.get("cluster_label", UNKNOWN),
        phenotype_label=obj.get("phenotype_label"),
        polygons=polygons,
    )


def write_manifest(records, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(record_to_json(r), sort_keys=True) for r in records]
    path.write_text("\n".join(lines) + ("\n" if lines else ""))


def read_manifest(path: str | Path):
    records = []
    for i, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            records.append(record_from_json(json.loads(line)))
        except (json.JSONDecodeError, KeyError) as exc:
            raise MalformedLine(f"manifest line {i}: {exc}") from exc
    return records


@dataclass(frozen=True)
class FoldSplit:
    """Assignment of record ids to folds 0..k-1."""

    k: int
    assignments: dict[str, int]

    def fold_ids(self, fold: int) -> list[str]:
        return [rid for rid, f in self.assignments.items() if f == fold]

    def fold_sizes(self) -> list[int]:
        sizes = [0] * self.k
        for f in self.assignments.values():
            sizes[f] += 1
        return sizes

    def split_records(self, records, fold: int):
        """(train, test) record lists for one fold, input order preserved."""
        train = [r for r in records if self.assignments[r.id] != fold]
        test = [r for r in records if self.assignments[r.id] == fold]
        return train, test

    def to_dict(self) -> dict:
        return {"k": self.k, "assignments": dict(self.assignments)}


def _deal_into_buckets(records, k: int, seed: int) -> dict[str, int]:
    """Round-robin deal per class with a rotating start bucket.

    Dealing each shuffled class onto buckets (offset + i) % k, where offset
    advances by the class size, balances every class and the total to
    within one record per bucket.
    """
    by_class: dict[str, list[str]] = {}
    for rec in records:
        by_class.setdefault(rec.cluster_label, []).append(rec.id)
    rng = np.random.default_rng(int(seed))
    assignments: dict[str, int] = {}
    offset = 0
    for label in sorted(by_class):
        ids = sorted(by_class[label])
        perm = rng.permutation(len(ids))
        for i, j in enumerate(perm):
            assignments[ids[j]] = (offset + i) % k
        offset = (offset + len(ids)) % k
    return assignments


def kfold_split(records, k: int = 5, seed: int = 0) -> FoldSplit:
    """Stratified k-fold assignment over cluster_label classes.

    Every class, and therefore every fold total, is balanced to within one
    record. Raises InsufficientRecords when any class has fewer than k
    members or ids collide.
    """
    records = list(records)
    if k < 2:
        raise ValueError("k must be >= 2")
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise ValueError("record ids must be unique")
    by_class: dict[str, int] = {}
    for r in records:
        by_class[r.cluster_label] = by_class.get(r.cluster_label, 0) + 1
    for label, n in sorted(by_class.items()):
        if n < k:
            raise InsufficientRecords(f"class {label!r} has {n} records, needs >= {k}")
    return FoldSplit(k=k, assignments=_deal_into_buckets(records, k, seed))


def split_412(records, seed: int = 0):
    """Stratified 4:1 train/test split (the fifth bucket becomes the test set)."""
    records = list(records)
    if len(records) < 5:
        raise InsufficientRecords(f"need at least 5 records, got {len(records)}")
    buckets = _deal_into_buckets(records, 5, seed)
    train = [r for r in records if buckets[r.id] != 0]
    test = [r for r in records if buckets[r.id] == 0]
    return train, test


def write_seg_labels(polygons) -> str:
    """Render (class_id, points) pairs as label text, six-decimal fixed point."""
    lines = []
    for cid, pts in polygons:
        arr = np.asarray(pts, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
            raise MalformedLine(f"polygon needs at least 3 (x, y) vertices, got shape {arr.shape}")
        coords = " ".join(f"{v:.6f}" for v in arr.ravel())
        lines.append(f"{int(cid)} {coords}")
    return "\n".join(lines) + ("\n" if lines else "")


def read_seg_labels(text: str):
    """Parse label text back into (class_id, points) pairs.

    Raises MalformedLine for non-numeric fields, odd coordinate counts,
    fewer than three vertices, or coordinates outside [0, 1].
    """
    out = []
    for i, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        try:
            cid = int(parts[0])
            coords = [float(v) for v in parts[1:]]
        except ValueError as exc:
            raise MalformedLine(f"line {i}: non-numeric field") from exc
        if cid < 0:
            raise MalformedLine(f"line {i}: negative class id")
        if len(coords) % 2 != 0:
            raise MalformedLine(f"line {i}: odd coordinate count {len(coords)}")
        if len(coords) < 6:
            raise MalformedLine(f"line {i}: needs at least 3 vertices")
        if any(not (0.0 <= v <= 1.0) for v in coords):
            raise MalformedLine(f"line {i}: coordinate outside [0, 1]")
        pts = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
        out.append((cid, pts))
    return out


def save_seg_labels(path: str | Path, polygons) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(write_seg_labels(polygons))


def load_seg_labels(path: str | Path):
    return read_seg_labels(Path(path).read_text())
