"""
Why tau = 0.15 and V = 140
==========================

Reproduces the threshold study on a designed synthetic set whose partial-cover
scenes straddle the 15% overlap boundary from both sides. The sweep grid shows
the accuracy plateau that contains the working point, the strict drop-off once
the threshold crosses a designed band, and the stain-area curve that motivates
the brightness floor.
"""

import numpy as np

from cccpipe.phenotype import sweep_thresholds
from cccpipe.synth import sweep_design_samples

# ---------------------------------------------------------------------------
# 1. The designed set: 24 scenes. Eight are clean, one per phenotype twice
#    over. Six carry a minor stain at ~11% coverage (so any tau at or below
#    0.10 over-accepts it), six at ~21% (so tau = 0.30 rejects a real stain),
#    and four carry a detached blob that must never count.

samples = sweep_design_samples(master_seed=0)
print(f"{len(samples)} designed samples")

# ---------------------------------------------------------------------------
# 2. Sweep the grid. Extraction runs once per brightness floor; tau only
#    re-labels the channel states afterwards.

result = sweep_thresholds(samples)

header = "tau      " + "  ".join(f"v={v:<4d}" for v in result.v_values)
print("\naccuracy grid")
print(header)
for i, tau in enumerate(result.taus):
    row = "  ".join(f"{result.accuracy[i, j]:6.3f}" for j in range(len(result.v_values)))
    marker = "  <- working point" if tau == 0.15 else ""
    print(f"{tau:<7.2f}  {row}{marker}")

# ---------------------------------------------------------------------------
# 3. Read the v=140 column: a plateau of perfect accuracy between the two
#    designed bands, with strict drops just outside. Scenes built at ~11% and
#    ~21% coverage cannot separate thresholds *between* those bands — any tau
#    in (0.123, 0.202] scores the same — which is exactly why the plateau,
#    not a lone spike, is the honest reading.

col = result.accuracy[:, result.v_values.index(140)]
print("\nv=140 column:", np.array2string(col, precision=3))
print("max accuracy", col.max(), "attained at taus",
      [t for t, a in zip(result.taus, col) if a == col.max()])

# ---------------------------------------------------------------------------
# 4. The designed set paints its stains uniformly bright, so the area curve
#    is flat across brightness floors there. The floor's actual job shows on
#    a brightness ramp: a green swatch whose value climbs 60 -> 255 left to
#    right. Raising the floor strictly shrinks what survives — dim smear goes
#    first, saturated signal stays.

from cccpipe.imaging import hsv_to_rgb, mask_area
from cccpipe.phenotype import extract_stain_region

ramp_hsv = np.zeros((64, 196, 3), dtype=np.uint8)
ramp_hsv[..., 0] = 60                                  # CD61's green hue
ramp_hsv[..., 1] = 200
ramp_hsv[..., 2] = np.linspace(60, 255, 196, dtype=np.uint8)[None, :]
ramp = hsv_to_rgb(ramp_hsv)

print("\nextracted area on a brightness ramp (64x196 swatch)")
for v in (100, 140, 170):
    area = mask_area(extract_stain_region(ramp, "CD61", v_x=v))
    print(f"  v={v}: {area:5d} px")
