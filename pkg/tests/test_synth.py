"""Synthetic scene generator: geometry, stains, artifacts, dataset output."""

from __future__ import annotations

import numpy as np
import pytest
from scipy import ndimage

from cccpipe.dataset import read_manifest, load_seg_labels
from cccpipe.errors import InvalidSpec
from cccpipe.imaging import (
    connected_components,
    disc_footprint,
    mask_area,
    rasterize_polygon,
    rgb_to_hsv,
)
from cccpipe.metrics import iou
from cccpipe.synth import Scene, SceneSpec, generate_dataset, generate_scene


def _cluster_spec(phenotype="PLT", seed=0, **kw):
    return SceneSpec(kind="cluster", phenotype=phenotype, n_cells=3, seed=seed, **kw)


class TestSceneSpecValidation:
    def test_cluster_needs_phenotype(self):
        with pytest.raises(InvalidSpec):
            SceneSpec(kind="cluster", phenotype=None)

    def test_non_cluster_rejects_phenotype(self):
        with pytest.raises(InvalidSpec):
            SceneSpec(kind="blank", phenotype="PLT", n_cells=0)

    def test_cell_count_constraints(self):
        with pytest.raises(InvalidSpec):
            SceneSpec(kind="single_cell", phenotype=None, n_cells=2)
        with pytest.raises(InvalidSpec):
            SceneSpec(kind="blank", phenotype=None, n_cells=1)
        with pytest.raises(InvalidSpec):
            SceneSpec(kind="cluster", phenotype="RBC", n_cells=1)

    def test_artifact_constraints(self):
        with pytest.raises(InvalidSpec):
            SceneSpec(kind="cluster", phenotype="WBC+PLT", artifact="stain_outside")
        with pytest.raises(InvalidSpec):
            SceneSpec(kind="cluster", phenotype="RBC", artifact="partial_cover")
        with pytest.raises(InvalidSpec):
            SceneSpec(kind="single_cell", phenotype=None, n_cells=1,
                      artifact="stain_outside")

    def test_unknown_kind(self):
        with pytest.raises(InvalidSpec):
            SceneSpec(kind="spooky")


class TestGeometry:
    def test_deterministic(self):
        a = generate_scene(_cluster_spec(seed=11, noise_sigma=4.0))
        b = generate_scene(_cluster_spec(seed=11, noise_sigma=4.0))
        assert np.array_equal(a.brightfield, b.brightfield)
        assert np.array_equal(a.cd61, b.cd61)
        assert np.array_equal(a.cd45, b.cd45)
        c = generate_scene(_cluster_spec(seed=12, noise_sigma=4.0))
        assert not np.array_equal(a.brightfield, c.brightfield)

    def test_cluster_is_one_component(self):
        for seed in range(8):
            scene = generate_scene(_cluster_spec(seed=seed))
            _, comps = connected_components(scene.cluster_mask)
            assert len(comps) == 1
            assert comps[0].area >= 250

    def test_separated_cells_keep_gaps(self):
        spec = SceneSpec(kind="multi_separated", phenotype=None, n_cells=3, seed=4)
        scene = generate_scene(spec)
        assert len(scene.cell_masks) == 3
        grown = [ndimage.binary_dilation(m, structure=disc_footprint(2))
                 for m in scene.cell_masks]
        for i in range(3):
            for j in range(i + 1, 3):
                assert not (grown[i] & grown[j]).any()

    def test_brightfield_contrast(self):
        scene = generate_scene(_cluster_spec(seed=2))
        inside = scene.brightfield[scene.cluster_mask][:, 0].astype(float)
        outside = scene.brightfield[~scene.cluster_mask][:, 0].astype(float)
        assert inside.mean() < 100
        assert outside.mean() > 190

    def test_blank_scene(self):
        scene = generate_scene(SceneSpec(kind="blank", phenotype=None, n_cells=0, seed=1))
        assert not scene.cluster_mask.any()
        assert scene.cd61 is None and scene.cd45 is None
        assert scene.gt_instances() == []
        assert np.all(scene.brightfield == 200)

    def test_gt_instances_per_kind(self):
        cluster = generate_scene(_cluster_spec(seed=3))
        assert len(cluster.gt_instances()) == 1
        single = generate_scene(SceneSpec(kind="single_cell", phenotype=None,
                                          n_cells=1, seed=3))
        assert len(single.gt_instances()) == 1
        multi = generate_scene(SceneSpec(kind="multi_separated", phenotype=None,
                                         n_cells=2, seed=3))
        assert len(multi.gt_instances()) == 2


class TestStains:
    def test_painted_stain_is_bright_and_saturated(self):
        for phenotype, channel in (("PLT", "cd61"), ("WBC", "cd45")):
            scene = generate_scene(_cluster_spec(phenotype=phenotype, seed=5))
            stain = scene.stain_masks[channel]
            assert mask_area(stain) >= 25
            img = scene.cd61 if channel == "cd61" else scene.cd45
            hsv = rgb_to_hsv(img[stain])
            assert hsv[:, 2].min() >= 180
            assert hsv[:, 1].min() >= 100

    def test_phenotype_overlap_targets(self):
        for seed in range(5):
            plt_scene = generate_scene(_cluster_spec(phenotype="PLT", seed=seed))
            assert plt_scene.painted_overlap("cd61") >= 0.5
            assert plt_scene.painted_overlap("cd45") == 0.0

            both = generate_scene(_cluster_spec(phenotype="WBC+PLT", seed=seed))
            assert both.painted_overlap("cd61") >= 0.45
            assert both.painted_overlap("cd45") >= 0.45

            rbc = generate_scene(_cluster_spec(phenotype="RBC", seed=seed))
            assert mask_area(rbc.stain_masks["cd61"]) == 0
            assert mask_area(rbc.stain_masks["cd45"]) == 0

    def test_stain_outside_fully_detached(self):
        scene = generate_scene(_cluster_spec(phenotype="PLT", seed=7,
                                             artifact="stain_outside"))
        assert scene.artifact_channels == ("cd45",)
        blob = scene.stain_masks["cd45"]
        assert mask_area(blob) >= 25
        assert not (blob & scene.cluster_mask).any()

    def test_stain_outside_with_overlap_target(self):
        scene = generate_scene(_cluster_spec(
            phenotype="WBC", seed=9, artifact="stain_outside", artifact_overlap=0.115))
        assert scene.artifact_channels == ("cd61",)
        got = scene.painted_overlap("cd61")
        assert 0.095 <= got <= 0.135

    def test_partial_cover_fraction(self):
        scene = generate_scene(_cluster_spec(
            phenotype="WBC+PLT", seed=13, artifact="partial_cover", artifact_overlap=0.23))
        got = scene.painted_overlap("cd45")
        assert 0.21 <= got <= 0.25
        # the shrunk stain stays inside the cluster
        assert not (scene.stain_masks["cd45"] & ~scene.cluster_mask).any()
        # the major stain is untouched
        assert scene.painted_overlap("cd61") >= 0.5


class TestGenerateDataset:
    def test_layout_and_determinism(self, tmp_path):
        m1 = generate_dataset(tmp_path / "a", n_per_category=2, seed=3)
        m2 = generate_dataset(tmp_path / "b", n_per_category=2, seed=3)
        assert m1.read_bytes() == m2.read_bytes()
        records = read_manifest(m1)
        assert len(records) == 14
        by_label = {}
        for r in records:
            by_label[r.cluster_label] = by_label.get(r.cluster_label, 0) + 1
        assert by_label == {"cluster": 8, "non-cluster": 6}

    def test_cluster_records_have_channels_and_labels(self, tmp_path):
        manifest = generate_dataset(tmp_path / "d", n_per_category=1, seed=1)
        for rec in read_manifest(manifest):
            bf = tmp_path / "d" / rec.brightfield
            assert bf.exists()
            if rec.cluster_label == "cluster":
                assert rec.cd61 and rec.cd45 and rec.phenotype_label
                assert (tmp_path / "d" / rec.cd61).exists()
                labels = load_seg_labels(tmp_path / "d" / "labels" / f"{rec.id}.txt")
                assert labels and labels[0][0] == 0
            else:
                assert rec.cd61 is None and rec.phenotype_label is None

    def test_label_polygons_match_gt_mask(self, tmp_path):
        from cccpipe.synth import build_spec
        spec = build_spec("plt", "cluster", "PLT", 0, master_seed=1, noise_sigma=0.0)
        scene = generate_scene(spec)
        generate_dataset(tmp_path / "d2", n_per_category=1, seed=1)
        labels = load_seg_labels(tmp_path / "d2" / "labels" / "plt_0000.txt")
        mask = np.zeros_like(scene.cluster_mask)
        for _, poly in labels:
            mask |= rasterize_polygon(poly, 224, 224)
        assert iou(mask, scene.cluster_mask) >= 0.99


@pytest.fixture(scope="module")
def designed():
    from cccpipe.synth import sweep_design_samples
    return sweep_design_samples(master_seed=0)


class TestSweepDesignSamples:

    def test_composition(self, designed):
        assert len(designed) == 24
        truths = [s.truth for s in designed]
        assert truths[:8] == ["RBC", "PLT", "WBC", "WBC+PLT"] * 2
        assert truths[8:14] == ["PLT"] * 6
        assert truths[14:20] == ["WBC+PLT"] * 6
        assert truths[20:] == ["PLT", "WBC", "PLT", "WBC"]
        for s in designed:
            assert s.cluster_mask.any()
            assert s.cd61 is not None and s.cd45 is not None

    def test_accuracy_curve_shape(self, designed):
        from cccpipe.phenotype import (
            DEFAULT_SWEEP_TAUS,
            DEFAULT_SWEEP_VS,
            sweep_thresholds,
        )
        res = sweep_thresholds(designed)
        col = res.accuracy[:, DEFAULT_SWEEP_VS.index(140)]
        by_tau = dict(zip(DEFAULT_SWEEP_TAUS, col))
        assert by_tau[0.15] == 1.0
        for tau in (0.13, 0.18, 0.20):
            assert by_tau[tau] == 1.0
        for tau in (0.05, 0.08, 0.10, 0.30):
            assert by_tau[tau] == 0.75

    def test_deterministic(self):
        from cccpipe.synth import sweep_design_samples
        a = sweep_design_samples(master_seed=3, n_clean=2, n_low=1, n_high=1,
                                 n_spill=1)
        b = sweep_design_samples(master_seed=3, n_clean=2, n_low=1, n_high=1,
                                 n_spill=1)
        for x, y in zip(a, b):
            assert np.array_equal(x.cd61, y.cd61)
            assert np.array_equal(x.cluster_mask, y.cluster_mask)
            assert x.truth == y.truth
