"""Command-line entry point: scan, split, train, bench, predict, report.

Exit codes: 0 success, 2 usage or input error, 3 runtime or training error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import dataset, evaluation, model_zoo, preprocess, report
from .config import load_config
from .errors import BadConfig, RuntimeFailure, SkinBenchError, UsageError
from .training import train


def _add_common(parser):
    parser.add_argument("--config", help="JSON config file; flags override it")
    parser.add_argument("--dataset-root", dest="dataset_root")
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--ratios", nargs=3, type=float, metavar=("TRAIN", "VAL", "TEST"))
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--learning-rate", dest="learning_rate", type=float)
    parser.add_argument("--backbones", nargs="+")
    parser.add_argument("--random-init", dest="random_init", action="store_const", const=True,
                        help="seeded random backbone weights instead of pretrained")
    parser.add_argument("--accept-png", dest="accept_png", action="store_const", const=True)
    parser.add_argument("--no-freeze", dest="freeze", action="store_const", const=False,
                        help="fine-tune the backbone instead of freezing it")
    parser.add_argument("--load-repetitions", dest="load_repetitions", type=int)


_OVERRIDE_KEYS = [
    "dataset_root", "output_dir", "seed", "ratios", "epochs", "batch_size",
    "learning_rate", "backbones", "random_init", "accept_png", "freeze",
    "load_repetitions",
]


def _config_from(args):
    overrides = {k: getattr(args, k, None) for k in _OVERRIDE_KEYS}
    cfg = load_config(args.config, overrides)
    if not cfg.dataset_root and args.command in ("scan", "split", "train", "bench"):
        raise BadConfig("dataset_root is required (set --dataset-root or the config file)")
    return cfg


def _scan(cfg):
    return dataset.scan_dataset(cfg.dataset_root, accept_png=cfg.accept_png)


def _split(cfg, manifest):
    return dataset.split_dataset(manifest, cfg.ratios, cfg.seed)


def cmd_scan(args) -> int:
    cfg = _config_from(args)
    manifest = _scan(cfg)
    if args.json:
        print(json.dumps({
            "root": str(manifest.root),
            "class_names": manifest.class_names,
            "counts_per_class": manifest.counts_per_class,
            "num_samples": len(manifest),
            "checksum": manifest.checksum(),
        }, indent=2))
    else:
        width = max(len(n) for n in manifest.class_names)
        print(f"dataset: {manifest.root}")
        for name in manifest.class_names:
            print(f"  {name.ljust(width)}  {manifest.counts_per_class[name]}")
        print(f"total: {len(manifest)} samples in {manifest.num_classes} classes")
    return 0


def cmd_split(args) -> int:
    cfg = _config_from(args)
    manifest = _scan(cfg)
    split = _split(cfg, manifest)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "split.json"
    dataset.save_split(split, manifest, path)
    print(f"split written to {path}")
    for name in ("train", "val", "test"):
        print(f"  {name}: {len(split.split(name))} samples")
    return 0


def _train_one(cfg, manifest, split, backbone_id, out_dir):
    spec = model_zoo.get_backbone(backbone_id)
    model = model_zoo.build_classifier(
        spec.id,
        manifest.num_classes,
        freeze=cfg.freeze,
        weights=cfg.weights_mode(),
        seed=cfg.seed,
        class_names=manifest.class_names,
    )
    models_dir = out_dir / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    artifact_path = models_dir / f"{spec.file_id}.skbm"

    log_path = out_dir / f"train_{spec.file_id}.log"
    with open(log_path, "w") as log_file:
        def log_fn(line):
            print(line)
            log_file.write(line + "\n")

        artifact, history = train(
            model, split.train, split.val, cfg.train_config(), artifact_path,
            log_fn=log_fn,
        )

    history_path = out_dir / f"{spec.file_id}_history.json"
    history_path.write_text(json.dumps(history.to_dict(), indent=2, sort_keys=True) + "\n")
    return artifact, history


def cmd_train(args) -> int:
    cfg = _config_from(args)
    manifest = _scan(cfg)
    split = _split(cfg, manifest)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifact, history = _train_one(cfg, manifest, split, args.backbone, out_dir)
    best = history.records[history.best_epoch]
    print(f"artifact: {artifact.path} ({artifact.byte_size} bytes)")
    print(f"best epoch {best.epoch}: val_accuracy {best.val_accuracy:.4f}")
    return 0


def _provenance(cfg, manifest):
    return {
        "config": cfg.to_dict(),
        "dataset_checksum": manifest.checksum(),
        "class_names": manifest.class_names,
        "seed": cfg.seed,
        "ratios": list(cfg.ratios),
        "train_config": cfg.train_config().to_dict(),
    }


def cmd_bench(args) -> int:
    cfg = _config_from(args)
    if not cfg.backbones:
        raise BadConfig("no backbones configured")
    manifest = _scan(cfg)
    split = _split(cfg, manifest)  # one shared split: every model sees the same test set
    out_dir = Path(cfg.output_dir)
    records_dir = out_dir / "records"
    records_dir.mkdir(parents=True, exist_ok=True)
    dataset.save_split(split, manifest, out_dir / "split.json")

    records = []
    for backbone_id in cfg.backbones:
        spec = model_zoo.get_backbone(backbone_id)
        print(f"=== {spec.id} ===")
        artifact, _ = _train_one(cfg, manifest, split, spec.id, out_dir)
        record = evaluation.evaluate_model(
            artifact, split.test, repetitions=cfg.load_repetitions,
            batch_size=cfg.batch_size,
        )
        (records_dir / f"{spec.file_id}.json").write_text(
            json.dumps(record.to_dict(), indent=2, sort_keys=True) + "\n"
        )
        records.append(record)

    table = report.build_table(records, sort_key=args.sort_key)
    written = report.emit_report(table, out_dir / "report", provenance=_provenance(cfg, manifest))
    print(f"report written to {out_dir / 'report'} ({len(written)} files)")
    print((out_dir / "report" / "comparison.txt").read_text())
    return 0


def cmd_report(args) -> int:
    cfg = _config_from(args)
    records_dir = Path(cfg.output_dir) / "records"
    if not records_dir.is_dir():
        raise BadConfig(f"no records directory at {records_dir}; run bench first")
    records = [
        evaluation.BenchmarkRecord.from_dict(json.loads(p.read_text()))
        for p in sorted(records_dir.glob("*.json"))
    ]
    table = report.build_table(records, sort_key=args.sort_key)
    written = report.emit_report(table, Path(cfg.output_dir) / "report")
    print(f"report written ({len(written)} files)")
    return 0


def cmd_predict(args) -> int:
    if args.top_k < 1:
        raise BadConfig(f"top_k must be >= 1, got {args.top_k}")
    model = model_zoo.load_model(args.model)
    names = model.class_names or [str(i) for i in range(model.num_classes)]
    if args.top_k > model.num_classes:
        raise BadConfig(
            f"top_k {args.top_k} exceeds the model's {model.num_classes} classes"
        )
    buf = dataset.load_image(args.image)
    tensor = preprocess.preprocess_image(buf, model.backbone.input)
    probs, _ = evaluation.predict(model, tensor)
    ranked = sorted(range(len(probs)), key=lambda i: (-probs[i], i))[:args.top_k]
    for i in ranked:
        print(f"{names[i]}\t{probs[i]:.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skinbench",
        description="Benchmark pretrained CNN backbones on a directory-per-class image dataset.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="discover the dataset and print class counts")
    _add_common(p)
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("split", help="write a stratified train/val/test split")
    _add_common(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train one backbone's classifier head")
    _add_common(p)
    p.add_argument("backbone", help="registered backbone id, e.g. MobileNet")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bench", help="train and compare every configured backbone")
    _add_common(p)
    p.add_argument("--sort-key", default="accuracy",
                   choices=sorted(report.SORT_KEYS), help="comparison table ordering")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="rebuild the report from saved benchmark records")
    _add_common(p)
    p.add_argument("--sort-key", default="accuracy", choices=sorted(report.SORT_KEYS))
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("predict", help="classify one image with a saved model")
    p.add_argument("model", help="path to a saved model artifact")
    p.add_argument("image", help="path to an image file")
    p.add_argument("--top-k", dest="top_k", type=int, default=1)
    p.set_defaults(func=cmd_predict)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except SkinBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
