"""Fluorescence phenotyping: stain extraction, overlap rule, decision table.

A channel is `absent` when the extracted stain is smaller than the minimum
area, `valid` when its overlap with the brightfield cluster mask reaches
the overlap threshold tau, and `artifact` otherwise (real signal in the
wrong place). The phenotype follows from the two channel states:

    CD61 valid + CD45 valid  -> WBC_PLT_cluster
    CD61 valid only          -> PLT_cluster
    CD45 valid only          -> WBC_cluster
    both absent              -> RBC_cluster
    anything else            -> Indeterminate

Overlap is measured against the cluster area: |stain & cluster| / |cluster|.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, EmptyClusterMask, EmptyDataset
from .imaging import HsvRange, as_mask, mask_area, morphological_open, threshold_hsv

DEFAULT_TAU = 0.15
DEFAULT_VX = 140
MIN_STAIN_AREA = 25

STAINS = ("CD61", "CD45")

ABSENT = "absent"
VALID = "valid"
ARTIFACT = "artifact"

RBC_CLUSTER = "RBC_cluster"
PLT_CLUSTER = "PLT_cluster"
WBC_CLUSTER = "WBC_cluster"
WBC_PLT_CLUSTER = "WBC_PLT_cluster"
INDETERMINATE = "Indeterminate"

DECISION_TO_LABEL = {
    RBC_CLUSTER: "RBC",
    PLT_CLUSTER: "PLT",
    WBC_CLUSTER: "WBC",
    WBC_PLT_CLUSTER: "WBC+PLT",
}


def stain_range(stain: str, v_x: int = DEFAULT_VX) -> HsvRange:
    """HSV gate for a stain at brightness floor v_x.

    CD61 reads out in green (hue 35..85 half-degrees), CD45 in yellow
    (hue 20..40); both require saturation >= 100 and value >= v_x.
    """
    if stain == "CD61":
        return HsvRange((35, 100, int(v_x)), (85, 255, 255))
    if stain == "CD45":
        return HsvRange((20, 100, int(v_x)), (40, 255, 255))
    raise ValueError(f"unknown stain {stain!r}")


def extract_stain_region(channel_img: np.ndarray, stain: str,
                         v_x: int = DEFAULT_VX, open_radius: int = 1) -> np.ndarray:
    """Thresholded stain mask, cleaned with a morphological opening."""
    return morphological_open(threshold_hsv(channel_img, stain_range(stain, v_x)),
                              open_radius)


def overlap_percent(cluster: np.ndarray, stain: np.ndarray) -> float:
    """|stain & cluster| / |cluster|; raises EmptyClusterMask on zero area."""
    cluster = as_mask(cluster)
    stain = as_mask(stain)
    if cluster.shape != stain.shape:
        raise DimensionMismatch(f"mask shapes differ: {cluster.shape} vs {stain.shape}")
    denom = mask_area(cluster)
    if denom == 0:
        raise EmptyClusterMask("cluster mask has zero area")
    return mask_area(cluster & stain) / denom


@dataclass(frozen=True)
class ChannelAssessment:
    stain: str
    stain_area: int
    overlap_area: int
    overlap: float
    state: str


def assess_channel(cluster: np.ndarray, stain_mask: np.ndarray, stain: str,
                   tau: float = DEFAULT_TAU,
                   min_stain_area: int = MIN_STAIN_AREA) -> ChannelAssessment:
    """Classify one channel's extracted stain as absent, valid, or artifact."""
    overlap = overlap_percent(cluster, stain_mask)
    area = mask_area(stain_mask)
    if area < min_stain_area:
        state = ABSENT
    elif overlap >= tau:
        state = VALID
    else:
        state = ARTIFACT
    return ChannelAssessment(
        stain=stain,
        stain_area=area,
        overlap_area=mask_area(as_mask(cluster) & as_mask(stain_mask)),
        overlap=overlap,
        state=state,
    )


@dataclass(frozen=True)
class PhenotypeDecision:
    phenotype: str
    cd61: ChannelAssessment
    cd45: ChannelAssessment
    tau: float
    v_x: int

    def to_dict(self) -> dict:
        return {
            "phenotype": self.phenotype,
            "tau": self.tau,
            "v_x": self.v_x,
            "cd61": {"state": self.cd61.state, "overlap": self.cd61.overlap,
                     "stain_area": self.cd61.stain_area},
            "cd45": {"state": self.cd45.state, "overlap": self.cd45.overlap,
                     "stain_area": self.cd45.stain_area},
        }


def decide_phenotype(cd61: ChannelAssessment, cd45: ChannelAssessment,
                     tau: float = DEFAULT_TAU, v_x: int = DEFAULT_VX) -> PhenotypeDecision:
    """Apply the decision table to two channel assessments."""
    v61 = cd61.state == VALID
    v45 = cd45.state == VALID
    if v61 and v45:
        phenotype = WBC_PLT_CLUSTER
    elif v61:
        phenotype = PLT_CLUSTER
    elif v45:
        phenotype = WBC_CLUSTER
    elif cd61.state == ABSENT and cd45.state == ABSENT:
        phenotype = RBC_CLUSTER
    else:
        phenotype = INDETERMINATE
    return PhenotypeDecision(phenotype=phenotype, cd61=cd61, cd45=cd45,
                             tau=tau, v_x=int(v_x))


def phenotype_cluster(cluster_mask: np.ndarray,
                      cd61_img: np.ndarray | None,
                      cd45_img: np.ndarray | None,
                      tau: float = DEFAULT_TAU, v_x: int = DEFAULT_VX,
                      min_stain_area: int = MIN_STAIN_AREA,
                      open_radius: int = 1) -> PhenotypeDecision:
    """Full phenotyping of one cluster from its channel images.

    A missing channel image counts as an empty (absent) stain.
    """
    cluster = as_mask(cluster_mask)
    assessments = {}
    for stain, img in (("CD61", cd61_img), ("CD45", cd45_img)):
        if img is None:
            stain_mask = np.zeros_like(cluster)
        else:
            stain_mask = extract_stain_region(img, stain, v_x=v_x, open_radius=open_radius)
        assessments[stain] = assess_channel(cluster, stain_mask, stain,
                                            tau=tau, min_stain_area=min_stain_area)
    return decide_phenotype(assessments["CD61"], assessments["CD45"], tau=tau, v_x=v_x)


@dataclass(frozen=True)
class PhenotypeSample:
    """One sweep input: cluster mask, channel images, and the true label."""

    cluster_mask: np.ndarray
    cd61: np.ndarray | None
    cd45: np.ndarray | None
    truth: str


DEFAULT_SWEEP_TAUS = (0.05, 0.08, 0.10, 0.13, 0.15, 0.18, 0.20, 0.30)
DEFAULT_SWEEP_VS = (100, 140, 170)


@dataclass(frozen=True)
class SweepResult:
    taus: tuple[float, ...]
    v_values: tuple[int, ...]
    accuracy: np.ndarray              # [len(taus), len(v_values)]
    mean_stain_area: dict[str, tuple[float, ...]]   # per stain, one value per v_x
    n_samples: int

    def best(self) -> tuple[float, int]:
        """(tau, v_x) of the highest accuracy cell; earliest cell wins ties."""
        idx = int(np.argmax(self.accuracy))
        i, j = divmod(idx, len(self.v_values))
        return self.taus[i], self.v_values[j]

    def accuracy_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["tau"] + [f"v{v}" for v in self.v_values])
        for i, tau in enumerate(self.taus):
            writer.writerow([f"{tau:.2f}"] + [f"{self.accuracy[i, j]:.6f}"
                                              for j in range(len(self.v_values))])
        return buf.getvalue()

    def stain_area_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["stain"] + [f"v{v}" for v in self.v_values])
        for stain in STAINS:
            writer.writerow([stain] + [f"{a:.2f}" for a in self.mean_stain_area[stain]])
        return buf.getvalue()


def sweep_thresholds(samples, taus=DEFAULT_SWEEP_TAUS, v_values=DEFAULT_SWEEP_VS,
                     min_stain_area: int = MIN_STAIN_AREA) -> SweepResult:
    """Phenotyping accuracy over a (tau, v_x) grid, plus mean stain areas.

    Extraction runs once per (sample, channel, v_x); tau only re-labels the
    channel states, so the grid is cheap in tau.
    """
    samples = list(samples)
    if not samples:
        raise EmptyDataset("threshold sweep needs at least one sample")
    taus = tuple(taus)
    v_values = tuple(int(v) for v in v_values)

    accuracy = np.zeros((len(taus), len(v_values)), dtype=np.float64)
    areas = {s: np.zeros(len(v_values), dtype=np.float64) for s in STAINS}

    for j, v_x in enumerate(v_values):
        extracted = []
        for sample in samples:
            cluster = as_mask(sample.cluster_mask)
            per_stain = {}
            for stain, img in (("CD61", sample.cd61), ("CD45", sample.cd45)):
                if img is None:
                    stain_mask = np.zeros_like(cluster)
                else:
                    stain_mask = extract_stain_region(img, stain, v_x=v_x)
                per_stain[stain] = stain_mask
                areas[stain][j] += mask_area(stain_mask)
            extracted.append((cluster, per_stain, sample.truth))
        for i, tau in enumerate(taus):
            hits = 0
            for cluster, per_stain, truth in extracted:
                a61 = assess_channel(cluster, per_stain["CD61"], "CD61",
                                     tau=tau, min_stain_area=min_stain_area)
                a45 = assess_channel(cluster, per_stain["CD45"], "CD45",
                                     tau=tau, min_stain_area=min_stain_area)
                decision = decide_phenotype(a61, a45, tau=tau, v_x=v_x)
                if DECISION_TO_LABEL.get(decision.phenotype) == truth:
                    hits += 1
            accuracy[i, j] = hits / len(samples)

    mean_area = {s: tuple(float(a / len(samples)) for a in areas[s]) for s in STAINS}
    return SweepResult(taus=taus, v_values=v_values, accuracy=accuracy,
                       mean_stain_area=mean_area, n_samples=len(samples))
