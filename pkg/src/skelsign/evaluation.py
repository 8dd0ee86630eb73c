"""Nested leave-one-person-out evaluation: splits, metrics, aggregation.

A split plan enumerates every ordered (test, val) signer pair, so n
signers yield n*(n-1) sessions with pairwise-disjoint test/val/train
sets. Per-session predictions are scored with accuracy and macro-averaged
precision/recall/F1 from the confusion matrix, then aggregated to
mean (SD) either over all sessions or per test signer first.
"""

from __future__ import annotations

import json
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .augmentation import AugmentConfig
from .encoding import EncodingSpec, encode_dataset, load_index, load_index_images
from .errors import ValidationError
from .imputation import ImputeConfig
from .landmarks import DatasetManifest
from .selection import load_manifest

METRIC_NAMES = ("accuracy", "macro_precision", "macro_recall", "macro_f1")
AGGREGATION_MODES = ("per_session", "per_test_signer")


@dataclass(frozen=True)
class Session:
    test: str
    val: str
    train: tuple[str, ...]

    def to_dict(self) -> dict:
        return {"test": self.test, "val": self.val, "train": list(self.train)}


@dataclass(frozen=True)
class SplitPlan:
    signers: tuple[str, ...]
    sessions: tuple[Session, ...]

    def to_dict(self) -> dict:
        return {
            "signers": list(self.signers),
            "sessions": [s.to_dict() for s in self.sessions],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, path: str | Path) -> "SplitPlan":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            signers=tuple(data["signers"]),
            sessions=tuple(
                Session(s["test"], s["val"], tuple(s["train"]))
                for s in data["sessions"]
            ),
        )


def make_split_plan(source: DatasetManifest | Sequence[str]) -> SplitPlan:
    """Enumerate all n*(n-1) nested LOPO sessions, ordered by (test, val)."""
    if isinstance(source, DatasetManifest):
        signers = source.signers
    else:
        signers = tuple(sorted(set(source)))
    if len(signers) < 3:
        raise ValidationError(
            f"nested LOPO needs at least 3 signers, got {len(signers)}"
        )
    sessions = []
    for test in signers:
        for val in signers:
            if val == test:
                continue
            train = tuple(s for s in signers if s not in (test, val))
            sessions.append(Session(test=test, val=val, train=train))
    return SplitPlan(signers=signers, sessions=tuple(sessions))


@dataclass(frozen=True)
class MetricsReport:
    """Classification metrics of one evaluation session."""

    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    labels: tuple[str, ...]
    confusion: np.ndarray
    per_class: dict = field(default_factory=dict)
    test_signer: str | None = None
    val_signer: str | None = None

    def __post_init__(self):
        confusion = np.asarray(self.confusion, dtype=np.int64).copy()
        confusion.flags.writeable = False
        object.__setattr__(self, "confusion", confusion)

    def metric(self, name: str) -> float:
        if name not in METRIC_NAMES:
            raise ValidationError(f"unknown metric '{name}'")
        return getattr(self, name)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "labels": list(self.labels),
            "confusion": self.confusion.tolist(),
            "per_class": self.per_class,
            "test_signer": self.test_signer,
            "val_signer": self.val_signer,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        return cls(
            accuracy=float(data["accuracy"]),
            macro_precision=float(data["macro_precision"]),
            macro_recall=float(data["macro_recall"]),
            macro_f1=float(data["macro_f1"]),
            labels=tuple(data["labels"]),
            confusion=np.asarray(data["confusion"], dtype=np.int64),
            per_class=dict(data.get("per_class", {})),
            test_signer=data.get("test_signer"),
            val_signer=data.get("val_signer"),
        )


def compute_metrics(
    truth: Sequence[str],
    pred: Sequence[str],
    classes: Sequence[str] | None = None,
    *,
    test_signer: str | None = None,
    val_signer: str | None = None,
) -> MetricsReport:
    """Confusion-matrix metrics with the zero-division-to-zero convention.

    Rows of the confusion matrix are truth, columns are predictions, in
    sorted class order.
    """
    if len(truth) != len(pred):
        raise ValidationError(f"{len(truth)} truth labels vs {len(pred)} predictions")
    if not truth:
        raise ValidationError("cannot compute metrics on empty label lists")
    labels = tuple(sorted(set(classes))) if classes is not None else tuple(
        sorted(set(truth) | set(pred))
    )
    index = {label: i for i, label in enumerate(labels)}
    for value in truth:
        if value not in index:
            raise ValidationError(f"truth label '{value}' not in class set")
    for value in pred:
        if value not in index:
            raise ValidationError(f"predicted label '{value}' not in class set")

    k = len(labels)
    confusion = np.zeros((k, k), dtype=np.int64)
    for t, p in zip(truth, pred):
        confusion[index[t], index[p]] += 1

    tp = np.diag(confusion).astype(float)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(tp + fp > 0, tp / (tp + fp), 0.0)
        recall = np.where(tp + fn > 0, tp / (tp + fn), 0.0)
        pr_sum = precision + recall
        f1 = np.where(pr_sum > 0, 2 * precision * recall / np.where(pr_sum > 0, pr_sum, 1), 0.0)

    per_class = {
        label: {
            "precision": float(precision[i]),
            "recall": float(recall[i]),
            "f1": float(f1[i]),
        }
        for i, label in enumerate(labels)
    }
    return MetricsReport(
        accuracy=float(tp.sum() / confusion.sum()),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        labels=labels,
        confusion=confusion,
        per_class=per_class,
        test_signer=test_signer,
        val_signer=val_signer,
    )


@dataclass(frozen=True)
class SessionSummary:
    """Mean and SD per metric across sessions (or test signers)."""

    mode: str
    n_sessions: int
    means: dict
    sds: dict

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "n_sessions": self.n_sessions,
            "means": self.means,
            "sds": self.sds,
        }


def aggregate_sessions(
    reports: Sequence[MetricsReport],
    mode: str = "per_session",
    *,
    ddof: int = 0,
) -> SessionSummary:
    """Aggregate session reports to mean and SD per metric.

    `per_test_signer` first averages each test signer's sessions, then
    aggregates across signers. SD is population SD by default (ddof=0).
    """
    if not reports:
        raise ValidationError("cannot aggregate zero reports")
    if mode not in AGGREGATION_MODES:
        raise ValidationError(f"unknown aggregation mode '{mode}'")

    if mode == "per_session":
        groups = [[r] for r in reports]
    else:
        by_signer: dict[str, list[MetricsReport]] = {}
        for report in reports:
            if report.test_signer is None:
                raise ValidationError("per_test_signer aggregation needs test_signer set")
            by_signer.setdefault(report.test_signer, []).append(report)
        groups = [by_signer[s] for s in sorted(by_signer)]

    means, sds = {}, {}
    for name in METRIC_NAMES:
        values = np.array([np.mean([r.metric(name) for r in group]) for group in groups])
        means[name] = float(values.mean())
        sds[name] = float(values.std(ddof=ddof)) if len(values) > ddof else 0.0
    return SessionSummary(mode=mode, n_sessions=len(reports), means=means, sds=sds)


def render_summary_table(
    rows: Sequence[tuple[str, SessionSummary]],
    baseline: SessionSummary | None = None,
) -> str:
    """Text table with Accuracy/Precision/Recall/F1 columns as `mean (SD)`.

    When a baseline summary is given, the last column reports the macro-F1
    improvement over it in percentage points.
    """
    header = ["Variant", "Accuracy", "Precision", "Recall", "F1-score"]
    if baseline is not None:
        header.append("F1 imp. (p.p.)")
    table = [header]
    for name, summary in rows:
        row = [name]
        for metric in METRIC_NAMES:
            row.append(f"{summary.means[metric]:.2f} ({summary.sds[metric]:.2f})")
        if baseline is not None:
            delta = (summary.means["macro_f1"] - baseline.means["macro_f1"]) * 100.0
            row.append(f"{delta:+.1f}")
        table.append(row)

    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = []
    for i, row in enumerate(table):
        lines.append("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


class CentroidProbe:
    """Nearest-centroid classifier over flattened image pixels.

    A deliberately trivial reference classifier: it has no training
    hyperparameters and makes pipeline-quality differences (such as
    imputed vs raw gaps) directly visible in the metrics.
    """

    def __init__(self):
        self._centroids: np.ndarray | None = None
        self._labels: tuple[str, ...] = ()

    def fit(self, images: Sequence[np.ndarray], labels: Sequence[str]) -> "CentroidProbe":
        if len(images) != len(labels) or not images:
            raise ValidationError("fit needs equally many images and labels, at least one")
        shapes = {img.shape for img in images}
        if len(shapes) != 1:
            raise ValidationError(f"images must share one shape, got {shapes}")
        flat = np.stack([img.reshape(-1).astype(np.float64) for img in images])
        self._labels = tuple(sorted(set(labels)))
        self._centroids = np.stack(
            [flat[np.array([l == label for l in labels])].mean(axis=0) for label in self._labels]
        )
        return self

    def predict(self, images: Sequence[np.ndarray]) -> list[str]:
        if self._centroids is None:
            raise ValidationError("probe is not fitted")
        results = []
        for img in images:
            flat = img.reshape(-1).astype(np.float64)
            if flat.shape[0] != self._centroids.shape[1]:
                raise ValidationError("image shape differs from the fitted images")
            distances = np.linalg.norm(self._centroids - flat, axis=1)
            results.append(self._labels[int(np.argmin(distances))])
        return results


@dataclass(frozen=True)
class TrainerEndpoint:
    """How session predictions are produced: the built-in centroid probe or
    an external command receiving `--session --images --out` and leaving a
    `preds.json` in the output directory."""

    kind: str = "builtin-centroid"
    command: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("builtin-centroid", "command"):
            raise ValidationError(f"unknown trainer endpoint kind '{self.kind}'")
        if self.kind == "command" and not self.command:
            raise ValidationError("command endpoint needs a non-empty command")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "command": list(self.command)}

    @classmethod
    def from_dict(cls, data: dict) -> "TrainerEndpoint":
        return cls(
            kind=str(data.get("kind", "builtin-centroid")),
            command=tuple(data.get("command", ())),
        )


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one evaluation run needs, persisted as a JSON file."""

    manifest_path: Path
    strategy: str = "arcanjo"
    impute: ImputeConfig | None = ImputeConfig()
    augment: AugmentConfig | None = None
    encoding: EncodingSpec = EncodingSpec()
    trainer: TrainerEndpoint = TrainerEndpoint()
    split_mode: str = "per_session"
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "manifest_path": str(self.manifest_path),
            "strategy": self.strategy,
            "impute": self.impute.to_dict() if self.impute else None,
            "augment": self.augment.to_dict() if self.augment else None,
            "encoding": self.encoding.to_dict(),
            "trainer": self.trainer.to_dict(),
            "split_mode": self.split_mode,
            "seed": self.seed,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        data = json.loads(path.read_text(encoding="utf-8"))
        manifest_path = Path(data["manifest_path"])
        if not manifest_path.is_absolute():
            manifest_path = path.parent / manifest_path
        return cls(
            manifest_path=manifest_path,
            strategy=str(data.get("strategy", "arcanjo")),
            impute=ImputeConfig.from_dict(data["impute"]) if data.get("impute") else None,
            augment=AugmentConfig.from_dict(data["augment"]) if data.get("augment") else None,
            encoding=EncodingSpec.from_dict(data.get("encoding", {})),
            trainer=TrainerEndpoint.from_dict(data.get("trainer", {})),
            split_mode=str(data.get("split_mode", "per_session")),
            seed=int(data.get("seed", 0)),
        )


def _split_items(items: list[dict], session: Session) -> tuple[list[dict], list[dict], list[dict]]:
    train = [it for it in items if it["signer_id"] in session.train]
    val = [it for it in items if it["signer_id"] == session.val]
    test = [it for it in items if it["signer_id"] == session.test]
    return train, val, test


def _run_command_endpoint(
    endpoint: TrainerEndpoint,
    session: Session,
    index_path: Path,
    work_dir: Path,
    config_path: Path | None,
) -> list[str]:
    session_path = work_dir / "session.json"
    session_path.write_text(json.dumps(session.to_dict(), indent=2) + "\n", encoding="utf-8")
    out_dir = work_dir / "trainer_out"
    out_dir.mkdir(parents=True, exist_ok=True)
    argv = list(endpoint.command) + [
        "--session", str(session_path),
        "--images", str(index_path),
        "--out", str(out_dir),
    ]
    if config_path is not None:
        argv += ["--experiment-config", str(config_path)]
    subprocess.run(argv, check=True)
    preds_path = out_dir / "preds.json"
    if not preds_path.exists():
        raise ValidationError(f"trainer command left no {preds_path}")
    preds = json.loads(preds_path.read_text(encoding="utf-8"))
    return [str(p) for p in preds["predictions"]]


def run_experiment(
    config: ExperimentConfig,
    out_dir: str | Path,
    *,
    workers: int = 1,
    config_path: Path | None = None,
    sessions_limit: int | None = None,
) -> dict:
    """Encode the dataset, run every LOPO session, aggregate, write reports.

    Returns the report dict also written to `<out_dir>/eval_report.json`.
    The trainer endpoint sees the full image index plus a session file and
    must return predictions for the test items in index order.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = DatasetManifest.from_json(config.manifest_path)
    selection = load_manifest(config.strategy)

    images_dir = out_dir / "images"
    index = encode_dataset(
        manifest, selection, config.impute, config.encoding, images_dir, workers=workers
    )
    if index["failures"]:
        raise ValidationError(f"encoding failures: {index['failures']}")
    index_path = images_dir / "index.json"
    items = index["items"]
    classes = sorted({it["label"] for it in items})

    plan = make_split_plan(manifest)
    sessions = plan.sessions[:sessions_limit] if sessions_limit else plan.sessions

    reports = []
    for i, session in enumerate(sessions):
        train_items, _val_items, test_items = _split_items(items, session)
        if not train_items or not test_items:
            raise ValidationError(
                f"session {session.test}/{session.val} has an empty partition"
            )
        truth = [it["label"] for it in test_items]
        if config.trainer.kind == "builtin-centroid":
            probe = CentroidProbe().fit(
                load_index_images(index_path, train_items),
                [it["label"] for it in train_items],
            )
            predictions = probe.predict(load_index_images(index_path, test_items))
        else:
            with tempfile.TemporaryDirectory(prefix=f"session_{i}_") as tmp:
                predictions = _run_command_endpoint(
                    config.trainer, session, index_path, Path(tmp), config_path
                )
        if len(predictions) != len(truth):
            raise ValidationError(
                f"trainer returned {len(predictions)} predictions for "
                f"{len(truth)} test items"
            )
        reports.append(
            compute_metrics(
                truth, predictions, classes,
                test_signer=session.test, val_signer=session.val,
            )
        )

    summaries = {
        mode: aggregate_sessions(reports, mode).to_dict() for mode in AGGREGATION_MODES
    }
    report = {
        "strategy": selection.name,
        "imputed": config.impute is not None,
        "n_sessions": len(reports),
        "classes": classes,
        "summaries": summaries,
        "sessions": [r.to_dict() for r in reports],
    }
    (out_dir / "eval_report.json").write_text(
        json.dumps(report, indent=2) + "\n", encoding="utf-8"
    )
    summary = SessionSummary(
        mode=config.split_mode,
        n_sessions=len(reports),
        means=summaries[config.split_mode]["means"],
        sds=summaries[config.split_mode]["sds"],
    )
    (out_dir / "eval_report.txt").write_text(
        render_summary_table([(selection.name, summary)]), encoding="utf-8"
    )
    return report
