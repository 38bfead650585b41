"""Command-line entry point wiring the pipeline stages together.

Every subcommand is deterministic given its flags and seeds: reports are
JSON with sorted keys (machine-readable output first, human tables second),
and reruns produce byte-identical files. Exit codes: 0 on success, 1 on a
data error, 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import backends as be
from . import dataset as ds
from .config import PipelineConfig, load_config
from .errors import CccPipeError
from .imaging import rasterize_polygon
from .metrics import (
    aggregate_folds,
    classification_metrics,
    confusion_from_labels,
    evaluate_segmentation,
    render_metrics_table,
    render_segeval_table,
)
from .phenotype import (
    DECISION_TO_LABEL,
    PhenotypeSample,
    phenotype_cluster,
    sweep_thresholds,
)
from .pngio import load_rgb, save_rgb
from .preprocess import expand_fivefold, pad_to_square, resize_bilinear

log = logging.getLogger("cccpipe")

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def _json_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_json_dumps(obj))


def _pmap(fn, items, threads: int):
    """Map preserving input order; threads == 0 means one per CPU."""
    items = list(items)
    if threads == 0:
        threads = os.cpu_count() or 1
    if threads == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _standardize(img: np.ndarray, size: int) -> np.ndarray:
    return resize_bilinear(pad_to_square(img), size, size)


def _gt_instances(record: ds.MultiChannelRecord, shape: tuple[int, int]):
    h, w = shape
    out = []
    for _, poly in record.polygons:
        mask = rasterize_polygon(poly, w, h)
        if not mask.any():
            continue
        out.append(be.InstancePrediction(mask=mask, box=be.tight_box(mask),
                                         confidence=1.0))
    return out


def _cluster_mask_from_labels(record: ds.MultiChannelRecord, shape: tuple[int, int]):
    h, w = shape
    mask = np.zeros(shape, dtype=bool)
    for _, poly in record.polygons:
        mask |= rasterize_polygon(poly, w, h)
    return mask


def _load_optional(root: Path, rel: str | None):
    return load_rgb(root / rel) if rel else None


def _make_classifier(spec: str, records, root: Path, size: int):
    """CLI classifier specs: the backend factory ones plus `oracle`."""
    if spec == "oracle":
        pairs = []
        for rec in records:
            img = _standardize(load_rgb(root / rec.brightfield), size)
            pairs.append((img, rec.cluster_label))
        return be.LookupClassifier.from_pairs(pairs)
    return be.make_classifier(spec)


def _make_segmenter(spec: str, records, root: Path):
    """CLI segmenter specs: the backend factory ones plus `echo`."""
    if spec == "echo":
        echo = be.EchoSegmenter()
        for rec in records:
            img = load_rgb(root / rec.brightfield)
            gts = _gt_instances(rec, img.shape[:2])
            echo.add(img, [g.mask for g in gts])
        return echo
    return be.make_segmenter(spec)


# ---------------------------------------------------------------- commands


def cmd_preprocess(args, cfg: PipelineConfig) -> int:
    in_dir = Path(args.input_dir)
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = sorted(p for p in in_dir.iterdir()
                   if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file())
    failures = []
    processed = 0
    for path in files:
        try:
            img = load_rgb(path)
            save_rgb(out_dir / (path.stem + ".png"), _standardize(img, cfg.size))
            processed += 1
        except Exception as exc:
            failures.append({"file": path.name, "error": str(exc)})
    sys.stdout.write(_json_dumps({
        "processed": processed,
        "failures": sorted(failures, key=lambda f: f["file"]),
        "output_dir": str(out_dir),
        "size": cfg.size,
    }))
    return 1 if failures else 0


def cmd_augment(args, cfg: PipelineConfig) -> int:
    manifest = Path(args.manifest)
    root = manifest.parent
    out = Path(args.out)
    (out / "images").mkdir(parents=True, exist_ok=True)
    records = ds.read_manifest(manifest)

    new_records = []
    for rec in records:
        img = _standardize(load_rgb(root / rec.brightfield), cfg.size)
        for variant_id, variant in expand_fivefold([(rec.id, img)],
                                                   base_seed=cfg.seed,
                                                   copies=args.copies):
            rel = f"images/{variant_id}.png"
            save_rgb(out / rel, variant)
            new_records.append(ds.MultiChannelRecord(
                id=variant_id, brightfield=rel,
                cluster_label=rec.cluster_label,
                phenotype_label=rec.phenotype_label))
    ds.write_manifest(new_records, out / "manifest.jsonl")
    sys.stdout.write(_json_dumps({
        "source_records": len(records),
        "written_records": len(new_records),
        "manifest": str(out / "manifest.jsonl"),
    }))
    return 0


def cmd_split(args, cfg: PipelineConfig) -> int:
    records = ds.read_manifest(args.manifest)
    split = ds.kfold_split(records, k=cfg.folds, seed=cfg.seed)
    payload = {"seed": cfg.seed, "fold_sizes": split.fold_sizes(), **split.to_dict()}
    if args.out:
        _write_json(Path(args.out), payload)
    sys.stdout.write(_json_dumps({"k": split.k, "seed": cfg.seed,
                                  "fold_sizes": split.fold_sizes()}))
    return 0


def cmd_crossval(args, cfg: PipelineConfig) -> int:
    manifest = Path(args.manifest)
    root = manifest.parent
    records = ds.read_manifest(manifest)
    split = ds.kfold_split(records, k=cfg.folds, seed=cfg.seed)
    classifier = _make_classifier(cfg.backend, records, root, cfg.size)

    def predict(rec: ds.MultiChannelRecord) -> str:
        img = _standardize(load_rgb(root / rec.brightfield), cfg.size)
        return be.classify(img, classifier).label

    fold_rows = []
    fold_metrics = []
    for fold in range(split.k):
        _, test = split.split_records(records, fold)
        predictions = _pmap(predict, test, cfg.threads)
        counts = confusion_from_labels([r.cluster_label for r in test], predictions,
                                       positive=ds.CLUSTER)
        m = classification_metrics(counts)
        fold_metrics.append(m)
        fold_rows.append({
            "fold": fold, "test_size": len(test),
            "counts": {"tp": counts.tp, "fp": counts.fp,
                       "tn": counts.tn, "fn": counts.fn},
            "metrics": {"accuracy": m.accuracy, "precision": m.precision,
                        "recall": m.recall, "f1": m.f1},
        })
    agg = aggregate_folds(fold_metrics)
    payload = {
        "backend": cfg.backend, "k": split.k, "seed": cfg.seed,
        "folds": fold_rows,
        "aggregate": {
            name: {"mean": getattr(agg.mean, name), "std": getattr(agg.std, name)}
            for name in ("accuracy", "precision", "recall", "f1")
        },
    }
    sys.stdout.write(_json_dumps(payload))
    table_rows = {f"fold {i}": m for i, m in enumerate(fold_metrics)}
    table_rows["mean"] = agg.mean
    table_rows["std"] = agg.std
    sys.stdout.write(render_metrics_table(table_rows))
    if args.out:
        _write_json(Path(args.out), payload)
    return 0


def cmd_segeval(args, cfg: PipelineConfig) -> int:
    manifest = Path(args.manifest)
    root = manifest.parent
    records = ds.read_manifest(manifest)
    segmenter = _make_segmenter(cfg.backend, records, root)

    def run_scene(rec: ds.MultiChannelRecord):
        img = load_rgb(root / rec.brightfield)
        predictions = be.segment(img, segmenter)
        return predictions, _gt_instances(rec, img.shape[:2])

    scenes = _pmap(run_scene, records, cfg.threads)
    report = evaluate_segmentation(scenes)
    sys.stdout.write(_json_dumps({"backend": cfg.backend, **report.to_dict()}))
    sys.stdout.write(render_segeval_table(report))
    if args.out:
        _write_json(Path(args.out), {"backend": cfg.backend, **report.to_dict()})
    return 0


def cmd_phenotype(args, cfg: PipelineConfig) -> int:
    manifest = Path(args.manifest)
    root = manifest.parent
    records = [r for r in ds.read_manifest(manifest) if r.cluster_label == ds.CLUSTER]
    segmenter = be.make_segmenter(cfg.backend) if args.masks == "predicted" else None

    lines = []
    failures = []
    scored = 0
    correct = 0
    for rec in records:
        img = load_rgb(root / rec.brightfield)
        if segmenter is not None:
            instances = be.segment(img, segmenter)
            mask = np.zeros(img.shape[:2], dtype=bool)
            for inst in instances:
                mask |= inst.mask
        else:
            mask = _cluster_mask_from_labels(rec, img.shape[:2])
        if not mask.any():
            failures.append({"id": rec.id, "error": "empty cluster mask"})
            continue
        if rec.cd61 is None or rec.cd45 is None:
            log.warning("record %s is missing a channel image; treating the "
                        "stain as absent", rec.id)
        decision = phenotype_cluster(mask,
                                     _load_optional(root, rec.cd61),
                                     _load_optional(root, rec.cd45),
                                     tau=cfg.tau, v_x=cfg.v_x)
        row = {"id": rec.id, **decision.to_dict()}
        if rec.phenotype_label is not None:
            predicted = DECISION_TO_LABEL.get(decision.phenotype)
            row["truth"] = rec.phenotype_label
            row["correct"] = predicted == rec.phenotype_label
            scored += 1
            correct += int(row["correct"])
        lines.append(json.dumps(row, sort_keys=True))

    out_path = Path(args.out) if args.out else None
    if out_path:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text("".join(line + "\n" for line in lines))
    else:
        for line in lines:
            sys.stdout.write(line + "\n")
    summary = {"records": len(records), "decided": len(lines),
               "failures": failures, "tau": cfg.tau, "v_x": cfg.v_x}
    if scored:
        summary["scored"] = scored
        summary["accuracy"] = correct / scored
    sys.stdout.write(_json_dumps(summary))
    return 1 if failures else 0


def cmd_sweep(args, cfg: PipelineConfig) -> int:
    if args.designed:
        from .synth import sweep_design_samples
        samples = sweep_design_samples(master_seed=cfg.seed)
    else:
        manifest = Path(args.manifest)
        root = manifest.parent
        samples = []
        for rec in ds.read_manifest(manifest):
            if rec.cluster_label != ds.CLUSTER or rec.phenotype_label is None:
                continue
            img = load_rgb(root / rec.brightfield)
            mask = _cluster_mask_from_labels(rec, img.shape[:2])
            if not mask.any():
                continue
            samples.append(PhenotypeSample(
                cluster_mask=mask,
                cd61=_load_optional(root, rec.cd61),
                cd45=_load_optional(root, rec.cd45),
                truth=rec.phenotype_label))
    result = sweep_thresholds(samples)
    best_tau, best_v = result.best()
    max_acc = float(result.accuracy.max())
    argmax = {
        str(v): [result.taus[i] for i in range(len(result.taus))
                 if result.accuracy[i, j] == max_acc]
        for j, v in enumerate(result.v_values)
    }
    sys.stdout.write(_json_dumps({
        "n_samples": result.n_samples,
        "best": {"tau": best_tau, "v_x": best_v, "accuracy": max_acc},
        "argmax_taus_per_v": argmax,
        "taus": list(result.taus),
        "v_values": list(result.v_values),
        "accuracy": [[float(a) for a in row] for row in result.accuracy],
    }))
    sys.stdout.write(result.accuracy_csv())
    sys.stdout.write(result.stain_area_csv())
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep_accuracy.csv").write_text(result.accuracy_csv())
        (out / "sweep_stain_areas.csv").write_text(result.stain_area_csv())
    return 0


def cmd_synth(args, cfg: PipelineConfig) -> int:
    from .synth import generate_dataset
    manifest = generate_dataset(args.out, n_per_category=args.n_per_category,
                                seed=cfg.seed, noise_sigma=args.noise_sigma,
                                artifact_fraction=args.artifact_fraction,
                                canvas=(cfg.size, cfg.size))
    n = len(ds.read_manifest(manifest))
    sys.stdout.write(_json_dumps({"manifest": str(manifest), "records": n}))
    return 0


def cmd_serve(args, cfg: PipelineConfig) -> int:
    import uvicorn

    from .service import create_app
    app = create_app(Path(cfg.dataset), backend=cfg.backend, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cccpipe",
        description="Two-stage cell-cluster analysis pipeline: classify, "
                    "segment, phenotype, evaluate.")
    parser.add_argument("--config", help="key=value config file "
                                         "(or set CCCPIPE_CONFIG)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(fn=fn)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads; 0 = one per CPU")
        return p

    p = add("preprocess", cmd_preprocess, "standardize a directory of images")
    p.add_argument("input_dir")
    p.add_argument("output_dir")
    p.add_argument("--size", type=int, default=None)

    p = add("augment", cmd_augment, "write augmented copies of every record")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--copies", type=int, default=5)

    p = add("split", cmd_split, "deal records into stratified folds")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out")
    p.add_argument("--k", type=int, default=None)

    p = add("crossval", cmd_crossval, "k-fold classification evaluation")
    p.add_argument("--manifest", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--backend", default=None,
                   help="classical | oracle | stub:<label>:<score> | onnx:<path>")
    p.add_argument("--out")

    p = add("segeval", cmd_segeval, "segmentation mAP against labels")
    p.add_argument("--manifest", required=True)
    p.add_argument("--backend", default=None,
                   help="classical | echo | onnx:<path>")
    p.add_argument("--out")

    p = add("phenotype", cmd_phenotype, "phenotype every cluster record")
    p.add_argument("--manifest", required=True)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--v-x", dest="v_x", type=int, default=None)
    p.add_argument("--masks", choices=("labels", "predicted"), default="labels")
    p.add_argument("--backend", default=None)
    p.add_argument("--out")

    p = add("sweep", cmd_sweep, "accuracy grid over (tau, v_x)")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest")
    src.add_argument("--designed", action="store_true",
                     help="use the built-in designed scene set")
    p.add_argument("--out-dir")

    p = add("synth", cmd_synth, "generate a synthetic labeled dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-per-category", type=int, default=10)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--artifact-fraction", type=float, default=0.0)

    p = add("serve", cmd_serve, "run the annotation HTTP service")
    p.add_argument("--dataset", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static", default=None,
                   help="directory of built UI assets to serve at /")

    return parser


_CONFIG_FLAGS = ("tau", "v_x", "seed", "threads", "size", "backend")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {}
    for key in _CONFIG_FLAGS:
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    if getattr(args, "k", None) is not None:
        overrides["folds"] = args.k
    if getattr(args, "dataset", None) is not None:
        overrides["dataset"] = args.dataset
    try:
        cfg = load_config(args.config, overrides)
    except (ValueError, OSError) as exc:
        parser.error(str(exc))
    try:
        return args.fn(args, cfg)
    except CccPipeError as exc:
        sys.stderr.write(_json_dumps({"error": type(exc).__name__,
                                      "message": str(exc)}))
        return 1


if __name__ == "__main__":
    sys.exit(main())
