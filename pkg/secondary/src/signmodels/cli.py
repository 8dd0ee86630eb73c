"""Command-line entry points: extract, train, predict, run-session.

`run-session` is the shape the evaluation harness invokes per LOPO
session: train on the session's signers, predict the test signer's
items, and leave `preds.json` in the output directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .extractor import ExtractionError, ExtractorConfig, extract
from .trainer import TrainConfig, TrainerError, load_index, predict, train

log = logging.getLogger("signmodels")


def _train_config(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        early_stop_patience=args.patience,
        pretrained=not args.no_pretrained,
        seed=args.seed,
    )


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=int, default=30)
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--learning-rate", type=float, default=1e-4)
    parser.add_argument("--patience", type=int, default=5)
    parser.add_argument("--no-pretrained", action="store_true",
                        help="skip ImageNet initialization")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--experiment-config",
                        help="pipeline experiment JSON enabling per-epoch augmentation")


def _load_session(path: str) -> dict:
    session = json.loads(Path(path).read_text(encoding="utf-8"))
    for key in ("test", "val", "train"):
        if key not in session:
            raise TrainerError(f"session file lacks '{key}'")
    return session


def _cmd_extract(args: argparse.Namespace) -> int:
    cfg = ExtractorConfig(
        min_detection_confidence=args.min_det,
        min_tracking_confidence=args.min_track,
    )
    path = extract(args.video, cfg, args.out)
    log.info("wrote %s", path)
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    session = _load_session(args.session)
    result = train(
        session,
        args.images,
        _train_config(args),
        args.out,
        experiment_config=args.experiment_config,
    )
    log.info(
        "best epoch %d with val accuracy %.3f (%s)",
        result.best_epoch,
        result.best_val_accuracy,
        "early-stopped" if result.stopped_early else "ran to the epoch limit",
    )
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    index = load_index(args.images)
    items = index["items"]
    if args.signer:
        items = [it for it in items if it["signer_id"] == args.signer]
    predictions = predict(args.ckpt, args.images, items)
    payload = {
        "predictions": predictions,
        "video_ids": [it["video_id"] for it in items],
    }
    Path(args.out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return 0


def _cmd_run_session(args: argparse.Namespace) -> int:
    session = _load_session(args.session)
    out_dir = Path(args.out)
    result = train(
        session,
        args.images,
        _train_config(args),
        out_dir,
        experiment_config=args.experiment_config,
    )
    index = load_index(args.images)
    test_items = [it for it in index["items"] if it["signer_id"] == session["test"]]
    predictions = predict(result.checkpoint_path, args.images, test_items)
    payload = {
        "predictions": predictions,
        "video_ids": [it["video_id"] for it in test_items],
    }
    (out_dir / "preds.json").write_text(
        json.dumps(payload, indent=2) + "\n", encoding="utf-8"
    )
    log.info("predicted %d test items for signer %s", len(test_items), session["test"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="signmodels",
        description="Landmark extraction and classifier training for skeleton images.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract landmarks from a video into a CSV")
    p.add_argument("--video", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-det", type=float, default=0.4)
    p.add_argument("--min-track", type=float, default=0.4)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("train", help="train one LOPO session")
    p.add_argument("--session", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="predict labels for an image index")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--signer", help="restrict to one signer's items")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("run-session", help="train then predict the test signer")
    p.add_argument("--session", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)
    _add_train_flags(p)
    p.set_defaults(func=_cmd_run_session)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (TrainerError, ExtractionError, OSError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
