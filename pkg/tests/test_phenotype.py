"""Stain extraction, channel assessment, decision table, threshold sweep."""

from __future__ import annotations

import numpy as np
import pytest

from cccpipe.errors import DimensionMismatch, EmptyClusterMask, EmptyDataset
from cccpipe.imaging import mask_area
from cccpipe.phenotype import (
    ABSENT,
    ARTIFACT,
    VALID,
    ChannelAssessment,
    DECISION_TO_LABEL,
    INDETERMINATE,
    PLT_CLUSTER,
    PhenotypeSample,
    RBC_CLUSTER,
    WBC_CLUSTER,
    WBC_PLT_CLUSTER,
    assess_channel,
    decide_phenotype,
    extract_stain_region,
    overlap_percent,
    phenotype_cluster,
    stain_range,
    sweep_thresholds,
)
from cccpipe.synth import SceneSpec, generate_scene


def _scene(phenotype, seed=0, **kw):
    return generate_scene(SceneSpec(kind="cluster", phenotype=phenotype,
                                    n_cells=3, seed=seed, **kw))


def _assessment(stain, state, area=100, overlap=0.5):
    return ChannelAssessment(stain=stain, stain_area=area,
                             overlap_area=int(area * overlap),
                             overlap=overlap, state=state)


class TestStainRange:
    def test_gate_bounds(self):
        g = stain_range("CD61", 140)
        assert g.lower == (35, 100, 140) and g.upper == (85, 255, 255)
        y = stain_range("CD45", 170)
        assert y.lower == (20, 100, 170) and y.upper == (40, 255, 255)
        with pytest.raises(ValueError):
            stain_range("CD3")


class TestExtraction:
    def test_recovers_painted_stain(self):
        scene = _scene("PLT", seed=3)
        got = extract_stain_region(scene.cd61, "CD61", v_x=140)
        painted = scene.stain_masks["cd61"]
        inter = mask_area(got & painted)
        union = mask_area(got | painted)
        assert inter / union >= 0.95

    def test_area_non_increasing_in_v(self):
        scene = _scene("WBC", seed=5, noise_sigma=8.0)
        areas = [mask_area(extract_stain_region(scene.cd45, "CD45", v_x=v))
                 for v in (100, 140, 170)]
        assert areas[0] >= areas[1] >= areas[2]

    def test_dark_channel_yields_nothing(self):
        scene = _scene("RBC", seed=2)
        assert mask_area(extract_stain_region(scene.cd61, "CD61")) == 0
        assert mask_area(extract_stain_region(scene.cd45, "CD45")) == 0


class TestOverlapPercent:
    def test_exact_fraction(self):
        cluster = np.zeros((10, 10), dtype=bool)
        cluster[0:10, 0:10] = True
        stain = np.zeros((10, 10), dtype=bool)
        stain[0:3, 0:10] = True
        assert overlap_percent(cluster, stain) == pytest.approx(0.3)

    def test_empty_cluster_raises(self):
        with pytest.raises(EmptyClusterMask):
            overlap_percent(np.zeros((5, 5), bool), np.ones((5, 5), bool))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            overlap_percent(np.ones((5, 5), bool), np.ones((4, 5), bool))


class TestAssessChannel:
    def _cluster(self):
        m = np.zeros((20, 20), dtype=bool)
        m[0:10, 0:10] = True
        return m

    def test_absent_below_min_area(self):
        stain = np.zeros((20, 20), dtype=bool)
        stain[0:4, 0:6] = True  # 24 px, one short of the floor
        a = assess_channel(self._cluster(), stain, "CD61")
        assert a.state == ABSENT and a.stain_area == 24

    def test_valid_at_exact_tau(self):
        stain = np.zeros((20, 20), dtype=bool)
        stain[0:10, 0:10] = True
        stain[0:10, 5:10] = False   # 50 px all inside: overlap 0.5
        a = assess_channel(self._cluster(), stain, "CD61", tau=0.5)
        assert a.overlap == pytest.approx(0.5)
        assert a.state == VALID

    def test_artifact_when_signal_misses_cluster(self):
        stain = np.zeros((20, 20), dtype=bool)
        stain[12:19, 12:19] = True  # 49 px, zero overlap
        a = assess_channel(self._cluster(), stain, "CD45")
        assert a.state == ARTIFACT and a.overlap == 0.0


class TestDecisionTable:
    @pytest.mark.parametrize("s61,s45,expected", [
        (VALID, VALID, WBC_PLT_CLUSTER),
        (VALID, ABSENT, PLT_CLUSTER),
        (VALID, ARTIFACT, PLT_CLUSTER),
        (ABSENT, VALID, WBC_CLUSTER),
        (ARTIFACT, VALID, WBC_CLUSTER),
        (ABSENT, ABSENT, RBC_CLUSTER),
        (ARTIFACT, ABSENT, INDETERMINATE),
        (ABSENT, ARTIFACT, INDETERMINATE),
        (ARTIFACT, ARTIFACT, INDETERMINATE),
    ])
    def test_all_nine_cells(self, s61, s45, expected):
        d = decide_phenotype(_assessment("CD61", s61), _assessment("CD45", s45))
        assert d.phenotype == expected

    def test_decision_records_parameters(self):
        d = decide_phenotype(_assessment("CD61", VALID), _assessment("CD45", ABSENT),
                             tau=0.2, v_x=170)
        assert d.tau == 0.2 and d.v_x == 170
        assert d.to_dict()["phenotype"] == PLT_CLUSTER


class TestPhenotypeCluster:
    @pytest.mark.parametrize("truth", ["RBC", "PLT", "WBC", "WBC+PLT"])
    def test_clean_scenes_called_correctly(self, truth):
        for seed in range(4):
            scene = _scene(truth, seed=seed)
            d = phenotype_cluster(scene.cluster_mask, scene.cd61, scene.cd45)
            assert DECISION_TO_LABEL[d.phenotype] == truth, (truth, seed)

    def test_missing_channel_counts_absent(self):
        scene = _scene("PLT", seed=1)
        d = phenotype_cluster(scene.cluster_mask, scene.cd61, None)
        assert d.phenotype == PLT_CLUSTER
        assert d.cd45.state == ABSENT

    def test_detached_blob_flagged_artifact(self):
        scene = _scene("PLT", seed=6, artifact="stain_outside")
        d = phenotype_cluster(scene.cluster_mask, scene.cd61, scene.cd45)
        assert d.phenotype == PLT_CLUSTER       # decision unharmed
        assert d.cd45.state == ARTIFACT         # spurious channel flagged

    def test_noisy_scenes_still_correct(self):
        for truth in ("PLT", "WBC+PLT"):
            scene = _scene(truth, seed=8, noise_sigma=8.0)
            d = phenotype_cluster(scene.cluster_mask, scene.cd61, scene.cd45)
            assert DECISION_TO_LABEL[d.phenotype] == truth


class TestSweep:
    def _samples(self, n=6):
        out = []
        for i in range(n):
            truth = ("PLT", "WBC", "WBC+PLT")[i % 3]
            scene = _scene(truth, seed=100 + i)
            out.append(PhenotypeSample(cluster_mask=scene.cluster_mask,
                                       cd61=scene.cd61, cd45=scene.cd45,
                                       truth=truth))
        return out

    def test_grid_shape_and_perfect_accuracy_on_clean_scenes(self):
        result = sweep_thresholds(self._samples(), taus=(0.10, 0.15, 0.20),
                                  v_values=(100, 140, 170))
        assert result.accuracy.shape == (3, 3)
        assert result.accuracy[1, 1] == 1.0   # tau 0.15, v 140

    def test_mean_stain_area_monotone_in_v(self):
        result = sweep_thresholds(self._samples(), taus=(0.15,),
                                  v_values=(100, 140, 170))
        for stain in ("CD61", "CD45"):
            a = result.mean_stain_area[stain]
            assert a[0] >= a[1] >= a[2]

    def test_csv_outputs(self):
        result = sweep_thresholds(self._samples(3), taus=(0.15, 0.20),
                                  v_values=(140,))
        acc_csv = result.accuracy_csv()
        assert acc_csv.splitlines()[0] == "tau,v140"
        assert len(acc_csv.splitlines()) == 3
        area_csv = result.stain_area_csv()
        assert area_csv.splitlines()[0] == "stain,v140"

    def test_empty_input_raises(self):
        with pytest.raises(EmptyDataset):
            sweep_thresholds([])

    def test_best_cell(self):
        result = sweep_thresholds(self._samples(3), taus=(0.05, 0.15),
                                  v_values=(140,))
        tau, v = result.best()
        assert v == 140 and tau in (0.05, 0.15)
