"""Annotation review service for the box-prompt labeling loop.

A reviewer draws a bounding box on a record, the server proposes a mask
polygon from the segmentation backend, and the reviewer accepts (persisting
a label file) or rejects (returning the task to the queue). Task state is
kept in memory and recovered on restart by replaying an append-only JSONL
journal, so no database is involved.

Task life cycle: pending -> proposed -> accepted, or proposed -> back to
pending on reject. Accept and reject are idempotent when repeated.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from pydantic import BaseModel

from . import backends as be
from . import dataset as ds
from .errors import (
    BoxOutOfBounds,
    EmptyProposal,
    InvalidTransition,
    MalformedLine,
    UnknownRecord,
)
from .imaging import mask_to_polygons
from .pngio import load_rgb

CHANNELS = ("brightfield", "cd61", "cd45")
JOURNAL_NAME = "journal.jsonl"
ANNOTATION_DIR = "annotations"
BOX_DILATE_PX = 2
MIN_BOX_AREA_PX = 4

Box = tuple[float, float, float, float]


@dataclass
class AnnotationTask:
    """Review state for one record. Box and polygon are normalized to [0, 1]."""

    record_id: str
    width: int
    height: int
    status: str = "pending"
    box: Box | None = None
    proposal: np.ndarray | None = None
    reviewer: str | None = None
    last_event: str | None = None

    def to_json(self) -> dict:
        return {
            "id": self.record_id,
            "width": self.width,
            "height": self.height,
            "status": self.status,
            "box": list(self.box) if self.box is not None else None,
            "proposal": {"points": self.proposal.tolist()}
            if self.proposal is not None else None,
            "reviewer": self.reviewer,
        }


def _box_pixels(box: Box, width: int, height: int) -> tuple[int, int, int, int]:
    """Map a normalized box to inclusive-exclusive pixel bounds, outward."""
    x, y, w, h = box
    x0 = int(np.floor(x * width))
    y0 = int(np.floor(y * height))
    x1 = int(np.ceil((x + w) * width))
    y1 = int(np.ceil((y + h) * height))
    return x0, y0, x1, y1


def validate_box(box, width: int, height: int) -> Box:
    try:
        x, y, w, h = (float(v) for v in box)
    except (TypeError, ValueError) as exc:
        raise BoxOutOfBounds(f"box must be four numbers, got {box!r}") from exc
    if not all(np.isfinite(v) for v in (x, y, w, h)):
        raise BoxOutOfBounds("box coordinates must be finite")
    if w <= 0 or h <= 0:
        raise BoxOutOfBounds("box width and height must be positive")
    if x < 0 or y < 0 or x + w > 1 + 1e-9 or y + h > 1 + 1e-9:
        raise BoxOutOfBounds("box leaves the unit square")
    x0, y0, x1, y1 = _box_pixels((x, y, w, h), width, height)
    if (x1 - x0) * (y1 - y0) < MIN_BOX_AREA_PX:
        raise BoxOutOfBounds(
            f"box covers fewer than {MIN_BOX_AREA_PX} pixels at {width}x{height}")
    return (x, y, w, h)


def propose_mask(img: np.ndarray, box: Box, segmenter) -> np.ndarray:
    """Segment inside the box and return the largest component's polygon.

    The box is dilated by a couple of pixels before cropping so objects that
    graze the drawn edge keep their boundary. The returned polygon is
    normalized to the full image, so it rasterizes in place.
    """
    height, width = img.shape[:2]
    validate_box(box, width, height)
    x0, y0, x1, y1 = _box_pixels(box, width, height)
    x0 = max(0, x0 - BOX_DILATE_PX)
    y0 = max(0, y0 - BOX_DILATE_PX)
    x1 = min(width, x1 + BOX_DILATE_PX)
    y1 = min(height, y1 + BOX_DILATE_PX)

    crop = img[y0:y1, x0:x1]
    instances = be.segment(crop, segmenter)
    if not instances:
        raise EmptyProposal("no object found inside the box")

    full = np.zeros((height, width), dtype=bool)
    full[y0:y1, x0:x1] = instances[0].mask  # highest confidence = largest
    polygons = mask_to_polygons(full)
    if not polygons:
        raise EmptyProposal("no object found inside the box")
    return polygons[0]


class TaskStore:
    """All annotation tasks for one dataset directory.

    Mutations take a per-record lock, so two reviewers poking the same
    record serialize; the journal has its own lock and is append-only.
    """

    def __init__(self, dataset_dir: str | Path, backend: str = "classical"):
        self.root = Path(dataset_dir)
        self.records = {r.id: r for r in ds.read_manifest(self.root / "manifest.jsonl")}
        self.segmenter = be.make_segmenter(backend)
        self.annotation_dir = self.root / ANNOTATION_DIR
        self.journal_path = self.annotation_dir / JOURNAL_NAME
        self._tasks: dict[str, AnnotationTask] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        self._journal_lock = threading.Lock()
        for rid in sorted(self.records):
            with Image.open(self.root / self.records[rid].brightfield) as im:
                width, height = im.size
            self._tasks[rid] = AnnotationTask(rid, width, height)
        self._replay()

    # -- journal ----------------------------------------------------------

    def _append(self, rid: str, event: str, **payload) -> None:
        entry = {"ts": round(time.time(), 3), "id": rid, "event": event, **payload}
        line = json.dumps(entry, sort_keys=True) + "\n"
        with self._journal_lock:
            self.annotation_dir.mkdir(parents=True, exist_ok=True)
            with open(self.journal_path, "a") as fh:
                fh.write(line)

    def _replay(self) -> None:
        if not self.journal_path.exists():
            return
        lines = self.journal_path.read_text().splitlines()
        for i, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                if i == len(lines):
                    break  # torn final write from a crash; drop it
                raise MalformedLine(f"journal line {i}: {exc}") from exc
            task = self._tasks.get(entry.get("id"))
            if task is None:
                continue  # record since removed from the manifest
            event = entry["event"]
            if event == "box":
                task.box = tuple(entry["box"])
                task.status = "pending"
            elif event == "propose":
                task.proposal = np.asarray(entry["points"], dtype=np.float64)
                task.status = "proposed"
            elif event == "accept":
                task.status = "accepted"
                task.reviewer = entry.get("reviewer")
            elif event == "reject":
                task.proposal = None
                task.status = "pending"
            task.last_event = event
        # an accept journaled just before a crash may have lost its label file
        for task in self._tasks.values():
            if task.status == "accepted" and not self.label_path(task.record_id).exists():
                self._write_label(task)

    # -- plumbing ----------------------------------------------------------

    def _lock_for(self, rid: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(rid, threading.Lock())

    def get(self, rid: str) -> AnnotationTask:
        try:
            return self._tasks[rid]
        except KeyError:
            raise UnknownRecord(f"unknown record {rid!r}") from None

    def queue(self) -> list[AnnotationTask]:
        """Pending tasks first, record id breaking ties."""
        return sorted(self._tasks.values(),
                      key=lambda t: (t.status != "pending", t.record_id))

    def counts(self) -> dict:
        out = {"pending": 0, "proposed": 0, "accepted": 0}
        for task in self._tasks.values():
            out[task.status] = out.get(task.status, 0) + 1
        return out

    def label_path(self, rid: str) -> Path:
        return self.annotation_dir / f"{rid}.txt"

    def image_path(self, rid: str, channel: str) -> Path | None:
        record = self.records[self.get(rid).record_id]
        rel = {"brightfield": record.brightfield,
               "cd61": record.cd61, "cd45": record.cd45}.get(channel)
        return self.root / rel if rel else None

    def _write_label(self, task: AnnotationTask) -> None:
        ds.save_seg_labels(self.label_path(task.record_id), [(0, task.proposal)])

    # -- transitions -------------------------------------------------------

    def set_box(self, rid: str, box) -> AnnotationTask:
        with self._lock_for(rid):
            task = self.get(rid)
            if task.status != "pending":
                raise InvalidTransition(
                    f"record {rid} is {task.status}; boxes can only move while pending")
            task.box = validate_box(box, task.width, task.height)
            task.last_event = "box"
            self._append(rid, "box", box=list(task.box))
            return task

    def propose(self, rid: str) -> AnnotationTask:
        with self._lock_for(rid):
            task = self.get(rid)
            if task.status != "pending":
                raise InvalidTransition(f"record {rid} is already {task.status}")
            if task.box is None:
                raise InvalidTransition(f"record {rid} has no box to propose from")
            img = load_rgb(self.root / self.records[rid].brightfield)
            task.proposal = propose_mask(img, task.box, self.segmenter)
            task.status = "proposed"
            task.last_event = "propose"
            self._append(rid, "propose", points=task.proposal.tolist())
            return task

    def accept(self, rid: str, reviewer: str | None = None) -> AnnotationTask:
        with self._lock_for(rid):
            task = self.get(rid)
            if task.status == "accepted":
                return task  # repeat accept is a no-op
            if task.status != "proposed":
                raise InvalidTransition(
                    f"record {rid} is {task.status}; only a proposed task can be accepted")
            self._write_label(task)
            task.status = "accepted"
            task.reviewer = reviewer
            task.last_event = "accept"
            self._append(rid, "accept", reviewer=reviewer)
            return task

    def reject(self, rid: str) -> AnnotationTask:
        with self._lock_for(rid):
            task = self.get(rid)
            if task.status == "pending" and task.last_event == "reject":
                return task  # repeat reject is a no-op
            if task.status != "proposed":
                raise InvalidTransition(
                    f"record {rid} is {task.status}; only a proposed task can be rejected")
            task.proposal = None  # box stays for a redraw
            task.status = "pending"
            task.last_event = "reject"
            self._append(rid, "reject")
            return task


def review_queue(dataset_dir: str | Path, backend: str = "classical"):
    """Tasks for a dataset, pending first: the order reviewers work in."""
    return TaskStore(dataset_dir, backend=backend).queue()


# -- HTTP layer -------------------------------------------------------------


class BoxIn(BaseModel):
    box: list[float]


class AcceptIn(BaseModel):
    reviewer: str | None = None


def create_app(dataset_dir: str | Path, backend: str = "classical",
               static_dir: str | Path | None = None):
    from fastapi import FastAPI, Request
    from fastapi.exceptions import RequestValidationError
    from fastapi.responses import JSONResponse, Response
    from starlette.exceptions import HTTPException as StarletteHTTPException

    from .errors import CccPipeError

    store = TaskStore(dataset_dir, backend=backend)
    app = FastAPI(title="cccpipe annotation service")
    app.state.store = store

    error_status = {BoxOutOfBounds: 400, InvalidTransition: 409,
                    EmptyProposal: 422, UnknownRecord: 404}

    @app.exception_handler(CccPipeError)
    def _domain_error(request: Request, exc: CccPipeError):
        status = error_status.get(type(exc), 400)
        return JSONResponse({"code": type(exc).__name__, "message": str(exc)},
                            status_code=status)

    @app.exception_handler(StarletteHTTPException)
    def _http_error(request: Request, exc: StarletteHTTPException):
        code = "NotFound" if exc.status_code == 404 else "HTTPError"
        return JSONResponse({"code": code, "message": str(exc.detail)},
                            status_code=exc.status_code)

    @app.exception_handler(RequestValidationError)
    def _bad_request(request: Request, exc: RequestValidationError):
        return JSONResponse({"code": "ValidationError", "message": str(exc)},
                            status_code=422)

    @app.get("/tasks")
    def list_tasks():
        return {"tasks": [t.to_json() for t in store.queue()],
                "counts": store.counts()}

    @app.get("/tasks/{rid}")
    def get_task(rid: str):
        return store.get(rid).to_json()

    @app.post("/tasks/{rid}/box")
    def post_box(rid: str, body: BoxIn):
        return store.set_box(rid, body.box).to_json()

    @app.post("/tasks/{rid}/propose")
    def post_propose(rid: str):
        return store.propose(rid).to_json()

    @app.post("/tasks/{rid}/accept")
    def post_accept(rid: str, body: AcceptIn | None = None):
        task = store.accept(rid, reviewer=body.reviewer if body else None)
        out = task.to_json()
        out["label_path"] = str(store.label_path(rid).relative_to(store.root))
        return out

    @app.post("/tasks/{rid}/reject")
    def post_reject(rid: str):
        return store.reject(rid).to_json()

    @app.get("/images/{rid}/{channel}")
    def get_image(rid: str, channel: str):
        from fastapi import HTTPException

        if channel not in CHANNELS:
            raise HTTPException(404, f"unknown channel {channel!r}")
        path = store.image_path(rid, channel)
        if path is None or not path.exists():
            raise HTTPException(404, f"record {rid} has no {channel} image")
        return Response(content=path.read_bytes(), media_type="image/png")

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
