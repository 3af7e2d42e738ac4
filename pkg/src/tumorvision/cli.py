"""Command-line pipeline: ingest-check, train, evaluate, predict, segment, serve.

Exit codes: 0 success, 2 configuration or I/O error, 3 data or checkpoint
error, 4 serve startup failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import cv2

from . import data as data_mod
from .classifiers import (
    CnnConfig,
    CompoundScaleConfig,
    ConfigError,
    build_baseline_cnn,
    build_scaled_classifier,
    classify,
    compound_scale,
    predict_class,
)
from .data import SplitSpec, ingest_dataset, load_mask_subset, split_dataset
from .preprocess import AugmentConfig, PreprocessConfig
from .service import ServiceConfig, create_app
from .training import (
    CheckpointError,
    DataError,
    TrainConfig,
    checkpoint_from_model,
    evaluate_classifier,
    evaluate_segmenter,
    load_checkpoint,
    prepare_image,
    restore_model,
    save_checkpoint,
    train_classifier,
    train_segmenter,
)
from .unet import SegModel, UNetConfig, build_unet, segment, threshold_mask

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SERVE = 4

_SCHEMA = {
    "dataset_root": None,
    "output_dir": None,
    "preprocess": {"target_size", "normalize_mode"},
    "augment": {"rotation_max_deg", "hflip_prob", "zoom_range", "seed"},
    "model": {
        "type", "conv_blocks", "fc_width", "input_size",
        "phi", "alpha", "beta", "gamma", "base_depth", "base_width", "base_resolution",
    },
    "unet": {"levels", "base_filters", "input_size"},
    "split": {"train_frac", "val_frac", "test_frac", "seed"},
    "train": {"epochs", "batch_size", "learning_rate", "seed", "early_stop_patience"},
}


@dataclass
class RunConfig:
    dataset_root: str
    output_dir: str
    preprocess: PreprocessConfig
    augment: AugmentConfig | None
    model: dict
    unet: UNetConfig
    split: SplitSpec
    train: TrainConfig
    digest: str


def load_run_config(path: str | Path) -> RunConfig:
    raw = json.loads(Path(path).read_text())
    unknown = set(raw) - set(_SCHEMA)
    if unknown:
        raise ValueError(f"unknown config key(s): {sorted(unknown)}")
    for section, allowed in _SCHEMA.items():
        if allowed is None or section not in raw or raw[section] is None:
            continue
        extra = set(raw[section]) - allowed
        if extra:
            raise ValueError(f"unknown key(s) in config section {section!r}: {sorted(extra)}")

    dataset_root = raw.get("dataset_root")
    if dataset_root is None or not Path(dataset_root).is_dir():
        raise ValueError(f"dataset_root {dataset_root!r} does not resolve to a directory")

    augment_raw = raw.get("augment")
    augment = None
    if augment_raw is not None:
        if "zoom_range" in augment_raw:
            augment_raw = {**augment_raw, "zoom_range": tuple(augment_raw["zoom_range"])}
        augment = AugmentConfig(**augment_raw)

    train_raw = dict(raw.get("train", {}))
    # digest covers run semantics only, not where outputs land
    digest_src = {k: v for k, v in raw.items() if k != "output_dir"}
    digest = hashlib.sha256(json.dumps(digest_src, sort_keys=True).encode()).hexdigest()[:12]
    return RunConfig(
        dataset_root=dataset_root,
        output_dir=raw.get("output_dir", "out"),
        preprocess=PreprocessConfig(**raw.get("preprocess", {})),
        augment=augment,
        model=raw.get("model", {"type": "baseline_cnn"}),
        unet=UNetConfig(**raw.get("unet", {})),
        split=SplitSpec(**raw.get("split", {})),
        train=TrainConfig(augment=augment, **train_raw),
        digest=digest,
    )


def _build_classifier(model_cfg: dict, input_size: int, seed: int):
    kind = model_cfg.get("type", "baseline_cnn")
    options = {k: v for k, v in model_cfg.items() if k != "type"}
    if kind == "baseline_cnn":
        if "conv_blocks" in options:
            options["conv_blocks"] = tuple(tuple(b) for b in options["conv_blocks"])
        options.setdefault("input_size", input_size)
        return build_baseline_cnn(CnnConfig(**options), seed=seed)
    if kind == "scaled":
        dims = compound_scale(CompoundScaleConfig(**options))
        return build_scaled_classifier(dims, seed=seed)
    raise ValueError(f"unknown model type {kind!r}")


def cmd_ingest_check(args) -> int:
    result = ingest_dataset(args.dataset_root)
    masked = load_mask_subset(args.dataset_root, result.records)
    print(json.dumps(
        {
            "records": len(result.records),
            "skipped": result.skipped,
            "per_class": result.per_class,
            "with_masks": len(masked),
        },
        indent=2, sort_keys=True,
    ))
    return EXIT_OK


def cmd_train(args) -> int:
    config = load_run_config(args.config)
    out = Path(args.out or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = ingest_dataset(config.dataset_root).records
    record_map = {r.id: r for r in records}
    split = split_dataset(records, config.split)

    if args.task == "classify":
        model = _build_classifier(config.model, config.preprocess.target_size, config.train.seed)
        trained, history = train_classifier(model, split, record_map, config.train)
        ckpt_path = out / "classifier.ckpt"
        eval_sets = {
            name: [record_map[i] for i in ids]
            for name, ids in (("train", split.train), ("val", split.val), ("test", split.test))
        }
        evaluate = evaluate_classifier
    else:
        masked = load_mask_subset(config.dataset_root, records)
        if not masked:
            raise DataError("no records with masks found; cannot train the segmenter")
        model = build_unet(config.unet, seed=config.train.seed)
        trained, history = train_segmenter(model, masked, config.train)
        ckpt_path = out / "segmenter.ckpt"
        eval_sets = {"train": masked}
        evaluate = evaluate_segmenter

    save_checkpoint(
        checkpoint_from_model(trained, meta={"config_digest": config.digest, "task": args.task}),
        ckpt_path,
    )
    (out / "history.csv").write_text(history.to_csv())
    for name, subset in eval_sets.items():
        if not subset:
            continue
        report = evaluate(trained, subset)
        report.split_name = name
        doc = report.to_dict(config_digest=config.digest)
        (out / f"metrics_{name}.json").write_text(json.dumps(doc, sort_keys=True, indent=2))
        print(json.dumps(doc, sort_keys=True))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = restore_model(load_checkpoint(args.checkpoint))
    records = ingest_dataset(args.dataset_root).records
    record_map = {r.id: r for r in records}
    spec = SplitSpec(args.train_frac, args.val_frac, args.test_frac, seed=args.seed or 0)
    split = split_dataset(records, spec)
    ids = {"train": split.train, "val": split.val, "test": split.test}[args.subset]

    if isinstance(model, SegModel):
        subset = load_mask_subset(args.dataset_root, [record_map[i] for i in ids])
        if not subset:
            raise DataError(f"no masked records in subset {args.subset!r}")
        report = evaluate_segmenter(model, subset)
    else:
        report = evaluate_classifier(model, [record_map[i] for i in ids])
    report.split_name = args.subset
    doc = report.to_dict()
    text = json.dumps(doc, sort_keys=True, indent=2)
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"metrics_{args.subset}.json").write_text(text)
    return EXIT_OK


def _read_image(path: str):
    image = cv2.imread(path, cv2.IMREAD_GRAYSCALE)
    if image is None:
        raise OSError(f"cannot read image {path}")
    return image


def cmd_predict(args) -> int:
    model = restore_model(load_checkpoint(args.checkpoint))
    image = _read_image(args.image)
    probs = classify(model, prepare_image(image, model.input_size))
    predicted, confidence = predict_class(probs)
    print(json.dumps(
        {
            "predicted_class": predicted.value,
            "confidence": confidence,
            "probabilities": {
                cls.value: float(p) for cls, p in zip(model.class_order, probs.values)
            },
        },
        sort_keys=True,
    ))
    return EXIT_OK


def cmd_segment(args) -> int:
    model = restore_model(load_checkpoint(args.checkpoint))
    image = _read_image(args.image)
    mask = threshold_mask(segment(model, prepare_image(image, model.input_size)))
    out_path = Path(args.out_mask)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(out_path), mask * 255):
        raise OSError(f"cannot write mask to {out_path}")
    print(json.dumps({"mask": str(out_path), "tumor_pixels": int(mask.sum())}))
    return EXIT_OK


def cmd_serve(args) -> int:
    import signal
    import threading

    import uvicorn

    try:
        config = ServiceConfig.from_file(args.config)
        app = create_app(config)
    except Exception as exc:
        logger.error("startup failed: %s", exc)
        return EXIT_SERVE

    server = uvicorn.Server(
        uvicorn.Config(app, host=config.host, port=config.port, log_level="warning")
    )
    failure: list[BaseException] = []

    def run_server():
        try:
            server.run()
        except BaseException as exc:  # bind errors surface as SystemExit/OSError
            failure.append(exc)

    # run the loop off the main thread so SIGTERM maps to a graceful exit 0
    thread = threading.Thread(target=run_server, daemon=True)
    for sig in (signal.SIGTERM, signal.SIGINT):
        signal.signal(sig, lambda *_: setattr(server, "should_exit", True))
    thread.start()
    while thread.is_alive():
        thread.join(timeout=0.2)
    if failure or not server.started:
        logger.error("server failed to start on %s:%s: %s", config.host, config.port,
                     failure[0] if failure else "startup aborted")
        return EXIT_SERVE
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tumorvision")
    parser.add_argument("--log-level", default="INFO")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest-check", help="validate dataset layout and print counts")
    p.add_argument("dataset_root")
    p.set_defaults(func=cmd_ingest_check)

    p = sub.add_parser("train", help="train a classifier or the segmenter")
    p.add_argument("--config", required=True)
    p.add_argument("--task", choices=["classify", "segment"], default="classify")
    p.add_argument("--out", help="output directory (defaults to the config's output_dir)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a dataset split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset-root", required=True)
    p.add_argument("--subset", choices=["train", "val", "test"], default="test")
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--val-frac", type=float, default=0.1)
    p.add_argument("--test-frac", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="classify one image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("segment", help="segment one image to a mask PNG")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out-mask", required=True)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("serve", help="run the inference HTTP service")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper())
    try:
        return args.func(args)
    except (DataError, data_mod.DataError, CheckpointError) as exc:
        logger.error("%s", exc)
        return EXIT_DATA
    except (ValueError, ConfigError, OSError, json.JSONDecodeError) as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
