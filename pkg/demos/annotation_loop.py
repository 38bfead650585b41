"""
The annotation loop, end to end
===============================

Drives the review workflow the way the browser UI does, but from Python:
generate a small labeled dataset, draw a box around a cluster, let the
segmentation backend propose a polygon, and accept it into a label file.
Also pokes the state machine where it should push back.
"""

import tempfile
from pathlib import Path

import numpy as np

from cccpipe import dataset as ds
from cccpipe.errors import InvalidTransition
from cccpipe.imaging import mask_area, rasterize_polygon
from cccpipe.service import TaskStore
from cccpipe.synth import generate_dataset

# ---------------------------------------------------------------------------
# 1. A throwaway dataset: seven records, four of them clusters.

root = Path(tempfile.mkdtemp()) / "demo-data"
generate_dataset(root, n_per_category=1, seed=21)
store = TaskStore(root)
queue = store.queue()
print(f"{len(queue)} tasks, first up: {queue[0].record_id}")

# ---------------------------------------------------------------------------
# 2. A reviewer would drag a box; we cheat and read it off the ground truth,
#    padded a little the way a human would draw it.

records = {r.id: r for r in ds.read_manifest(root / "manifest.jsonl")}
rid = "wbc_0000"
gt = np.zeros((224, 224), dtype=bool)
for _, pts in records[rid].polygons:
    gt |= rasterize_polygon(pts, 224, 224)
ys, xs = np.nonzero(gt)
box = ((xs.min() - 4) / 224, (ys.min() - 4) / 224,
       (xs.max() - xs.min() + 9) / 224, (ys.max() - ys.min() + 9) / 224)
store.set_box(rid, box)

# ---------------------------------------------------------------------------
# 3. Propose: the backend segments inside the (slightly dilated) box and
#    returns the largest component's outline, normalized to the full frame.

task = store.propose(rid)
mask = rasterize_polygon(task.proposal, 224, 224)
inter = mask_area(mask & gt)
union = mask_area(mask | gt)
print(f"proposal: {len(task.proposal)} vertices, IoU vs truth {inter / union:.3f}")

# ---------------------------------------------------------------------------
# 4. Accept writes the label file in the same normalized polygon format the
#    training data uses, and records who signed off.

task = store.accept(rid, reviewer="demo")
label = store.label_path(rid)
print(f"accepted -> {label.name}: {label.read_text().split()[0]} "
      f"+ {len(label.read_text().split()) - 1} coordinates")

# ---------------------------------------------------------------------------
# 5. The state machine holds its shape: an accepted task cannot be rejected,
#    and a never-proposed task cannot be accepted.

for action in (lambda: store.reject(rid), lambda: store.accept("single_0000")):
    try:
        action()
    except InvalidTransition as exc:
        print(f"refused: {exc}")

# A restart replays the journal and lands in the same state.
again = TaskStore(root)
print(f"after replay: {again.get(rid).status}, reviewer {again.get(rid).reviewer!r}")
