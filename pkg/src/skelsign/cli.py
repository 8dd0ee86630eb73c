"""Command-line entry point composing the pipeline stages via files.

Every subcommand reads and writes plain files (CSV sequences, JSON
manifests and indexes, PNG images), so stages are auditable and
resumable. Each run drops a `run_stamp.json` (tool version, seed, argv,
config hash) next to its outputs; identical inputs, argv, and seed yield
identical artifacts.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .augmentation import AugmentConfig
from .benchmark import BenchReport, compare_reports, pipeline_stages, run_bench
from .encoding import EncodingSpec, encode_dataset
from .errors import SkelsignError
from .evaluation import (
    ExperimentConfig,
    SessionSummary,
    make_split_plan,
    render_summary_table,
    run_experiment,
)
from .imputation import ImputeConfig, ImputeStats, impute_sequence
from .landmarks import (
    DatasetManifest,
    ManifestEntry,
    iter_dataset_sequences,
    write_sequence,
)
from .selection import BUILTIN_STRATEGIES, apply_selection, load_manifest
from .synth import DEFAULT_CLASSES, make_synthetic_dataset

log = logging.getLogger("skelsign")


def _write_stamp(out_dir: Path, args: argparse.Namespace, config: dict | None = None) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = json.dumps(config or {}, sort_keys=True).encode("utf-8")
    stamp = {
        "tool": "skelsign",
        "version": __version__,
        "subcommand": args.command,
        "seed": getattr(args, "seed", 0),
        "argv": args.raw_argv,
        "config_sha256": hashlib.sha256(payload).hexdigest(),
    }
    (out_dir / "run_stamp.json").write_text(
        json.dumps(stamp, indent=2) + "\n", encoding="utf-8"
    )


def _rewrite_sequences(manifest, out_dir: Path, transform) -> DatasetManifest:
    """Apply `transform` to every (video, repetition) and write the results."""
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for seq in iter_dataset_sequences(manifest):
        seq = transform(seq)
        path = out_dir / f"{seq.video_id}.csv"
        write_sequence(seq, path)
        entries.append(
            ManifestEntry(
                video_id=seq.video_id,
                signer_id=seq.signer_id,
                label=seq.label,
                path=path,
            )
        )
    result = DatasetManifest(entries=tuple(entries))
    result.to_json(out_dir / "manifest.json")
    return result


def _impute_config(args: argparse.Namespace) -> ImputeConfig:
    return ImputeConfig(
        window=args.window,
        cubic_min_points=args.cubic_min_points,
        allow_extrapolation=args.allow_extrapolation,
    )


def _add_impute_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--window", type=int, default=5, help="observed frames per gap side")
    parser.add_argument("--cubic-min-points", type=int, default=4)
    parser.add_argument("--allow-extrapolation", action="store_true")


def _cmd_ingest(args: argparse.Namespace) -> int:
    manifest = DatasetManifest.from_json(args.manifest)
    out_dir = Path(args.out)
    result = _rewrite_sequences(manifest, out_dir, lambda seq: seq)
    _write_stamp(out_dir, args)
    log.info("ingested %d sequences into %s", len(result.entries), out_dir)
    return 0


def _cmd_select(args: argparse.Namespace) -> int:
    selection = load_manifest(args.strategy)
    if args.dump_manifest:
        selection.save(args.dump_manifest)
        log.info("wrote manifest '%s' to %s", selection.name, args.dump_manifest)
        return 0
    if not args.manifest or not args.out:
        raise SkelsignError("select needs --manifest and --out (or --dump-manifest)")
    manifest = DatasetManifest.from_json(args.manifest)
    out_dir = Path(args.out)
    _rewrite_sequences(manifest, out_dir, lambda seq: apply_selection(seq, selection))
    _write_stamp(out_dir, args, {"strategy": selection.name})
    return 0


def _cmd_impute(args: argparse.Namespace) -> int:
    cfg = _impute_config(args)
    manifest = DatasetManifest.from_json(args.manifest)
    out_dir = Path(args.out)
    totals = ImputeStats()

    def transform(seq):
        filled, stats = impute_sequence(seq, cfg)
        totals.merge(stats)
        return filled

    _rewrite_sequences(manifest, out_dir, transform)
    totals.save(out_dir / "impute_stats.json")
    _write_stamp(out_dir, args, cfg.to_dict())
    log.info("imputation stats: %s", totals.to_dict())
    return 0


def _cmd_encode(args: argparse.Namespace) -> int:
    manifest = DatasetManifest.from_json(args.manifest)
    selection = load_manifest(args.strategy)
    impute_cfg = None if args.no_impute else _impute_config(args)
    spec = EncodingSpec(pad_policy=args.pad_policy)
    augment_cfg = None
    if args.augment_config:
        augment_cfg = AugmentConfig.from_dict(
            json.loads(Path(args.augment_config).read_text(encoding="utf-8"))
        )
    video_ids = args.videos.split(",") if args.videos else None
    out_dir = Path(args.out)
    index = encode_dataset(
        manifest,
        selection,
        impute_cfg,
        spec,
        out_dir,
        augment_cfg=augment_cfg,
        epoch=args.epoch,
        video_ids=video_ids,
        workers=args.workers,
    )
    _write_stamp(
        out_dir,
        args,
        {
            "strategy": selection.name,
            "impute": impute_cfg.to_dict() if impute_cfg else None,
            "encoding": spec.to_dict(),
            "augment": augment_cfg.to_dict() if augment_cfg else None,
            "epoch": args.epoch,
        },
    )
    if index["failures"]:
        log.error("%d sequences failed to encode", len(index["failures"]))
        return 1
    log.info("encoded %d images into %s", len(index["items"]), out_dir)
    return 0


def _cmd_split(args: argparse.Namespace) -> int:
    manifest = DatasetManifest.from_json(args.manifest, check_files=not args.no_check_files)
    plan = make_split_plan(manifest)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    plan.save(out_path)
    _write_stamp(out_path.parent, args)
    log.info("%d signers -> %d sessions", len(plan.signers), len(plan.sessions))
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    config = ExperimentConfig.from_json(config_path)
    out_dir = Path(args.out)
    report = run_experiment(
        config,
        out_dir,
        workers=args.workers,
        config_path=config_path,
        sessions_limit=args.sessions,
    )
    _write_stamp(out_dir, args, config.to_dict())
    means = report["summaries"][config.split_mode]["means"]
    log.info(
        "evaluated %d sessions: accuracy %.3f, macro-F1 %.3f",
        report["n_sessions"], means["accuracy"], means["macro_f1"],
    )
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    config = ExperimentConfig.from_json(args.config)
    stages = pipeline_stages(config.strategy, config.impute, config.encoding)
    if args.stages:
        wanted = args.stages.split(",")
        unknown = [s for s in wanted if s not in stages]
        if unknown:
            raise SkelsignError(f"unknown stages {unknown}; available: {list(stages)}")
        stages = {name: stages[name] for name in stages if name in wanted}
    report = run_bench(stages, args.video, args.runs)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report.save(out_dir / "bench_report.json")
    (out_dir / "bench_report.txt").write_text(report.render_text(), encoding="utf-8")
    print(report.render_text(), end="")
    if args.baseline_report:
        baseline = BenchReport.from_json(args.baseline_report)
        speedup = compare_reports(report, baseline)
        (out_dir / "speedup.json").write_text(
            json.dumps(speedup.to_dict(), indent=2) + "\n", encoding="utf-8"
        )
        print(speedup.render_text(), end="")
    _write_stamp(out_dir, args, {"runs": args.runs, "stages": list(stages)})
    return 0


def _summary_from_report(report: dict, mode: str) -> SessionSummary:
    data = report["summaries"][mode]
    return SessionSummary(
        mode=mode,
        n_sessions=report["n_sessions"],
        means=data["means"],
        sds=data["sds"],
    )


def _cmd_report(args: argparse.Namespace) -> int:
    report = json.loads(Path(args.eval).read_text(encoding="utf-8"))
    summary = _summary_from_report(report, args.mode)
    baseline = None
    rows = [(report.get("strategy", "candidate"), summary)]
    if args.baseline:
        base_report = json.loads(Path(args.baseline).read_text(encoding="utf-8"))
        baseline = _summary_from_report(base_report, args.mode)
        rows.append((base_report.get("strategy", "baseline") + " (baseline)", baseline))
    text = render_summary_table(rows, baseline)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        print(text, end="")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    out_dir = Path(args.out)
    manifest = make_synthetic_dataset(
        out_dir,
        classes=tuple(args.classes.split(",")),
        samples_per_class=args.samples_per_class,
        signers=args.signers,
        frames=args.frames,
        dropout=args.dropout,
        seed=args.seed,
    )
    _write_stamp(out_dir, args, {"dropout": args.dropout, "frames": args.frames})
    log.info("wrote %d synthetic sequences to %s", len(manifest.entries), out_dir)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skelsign",
        description="Landmark-sequence to skeleton-image pipeline for isolated sign recognition.",
    )
    parser.add_argument("--version", action="version", version=f"skelsign {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--verbose", "-v", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="validate and re-emit canonical sequences")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("select", parents=[common], help="apply a landmark subset strategy")
    p.add_argument("--strategy", required=True, help=f"built-in {BUILTIN_STRATEGIES} or manifest path")
    p.add_argument("--manifest")
    p.add_argument("--out")
    p.add_argument("--dump-manifest", help="write the strategy manifest JSON and exit")
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("impute", parents=[common], help="fill missing landmarks by spline interpolation")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    _add_impute_flags(p)
    p.set_defaults(func=_cmd_impute)

    p = sub.add_parser("encode", parents=[common], help="encode sequences into skeleton images")
    p.add_argument("--manifest", required=True)
    p.add_argument("--strategy", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-impute", action="store_true")
    _add_impute_flags(p)
    p.add_argument("--pad-policy", choices=("zero_pad", "repeat_last"), default="zero_pad")
    p.add_argument("--augment-config", help="JSON file with augmentation ranges")
    p.add_argument("--epoch", type=int, default=0, help="augmentation RNG epoch")
    p.add_argument("--videos", help="comma-separated video_ids to encode")
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("split", parents=[common], help="generate the nested LOPO split plan")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-check-files", action="store_true")
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("evaluate", parents=[common], help="run all LOPO sessions and aggregate")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--sessions", type=int, help="limit the number of sessions (debugging)")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("bench", parents=[common], help="time pipeline stages on one sequence")
    p.add_argument("--config", required=True)
    p.add_argument("--video", required=True, help="sequence CSV to process")
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--stages", help="comma-separated stage subset")
    p.add_argument("--baseline-report", help="bench report JSON to compare against")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("report", parents=[common], help="render evaluation reports as a table")
    p.add_argument("--eval", required=True, help="eval_report.json of the candidate")
    p.add_argument("--baseline", help="eval_report.json to diff F1 against")
    p.add_argument("--mode", choices=("per_session", "per_test_signer"), default="per_session")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic trajectory dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", default=",".join(DEFAULT_CLASSES))
    p.add_argument("--samples-per-class", type=int, default=20)
    p.add_argument("--signers", type=int, default=4)
    p.add_argument("--frames", type=int, default=45)
    p.add_argument("--dropout", type=float, default=0.0)
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.raw_argv = argv
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except SkelsignError as exc:
        log.error("%s", exc)
        return 1
    except OSError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
