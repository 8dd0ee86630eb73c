"""Skeleton-image classifier training and prediction for LOPO sessions.

The model is an 18-layer residual network whose pooled 512-feature output
passes through batch normalization, a 128-unit ReLU layer with 50%
dropout, and a class-logit layer. Training minimizes cross-entropy with
Adam (batch 64, learning rate 1e-4, weight decay 1e-4) for up to 30
epochs, early-stopping after five consecutive epochs without a strict
validation-loss improvement; the checkpoint with the highest validation
accuracy (earliest epoch on ties) is the one kept.

Data flows through files only: the image index produced by the encoding
pipeline comes in, predictions go out as JSON. When an experiment config
is supplied, the training split is re-encoded each epoch with that
epoch's augmentation stream by invoking the pipeline CLI, so augmentation
happens on landmark sequences before encoding, never on stored images.
"""

from __future__ import annotations

import copy
import dataclasses
import json
import logging
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torch import nn

log = logging.getLogger("signmodels")

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class TrainerError(Exception):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 1e-4
    weight_decay: float = 1e-4
    dropout: float = 0.5
    early_stop_patience: int = 5
    hidden_units: int = 128
    input_size: int = 224
    resize_mode: str = "bilinear"
    pretrained: bool = True
    seed: int = 0

    def __post_init__(self):
        positive = (
            "batch_size", "learning_rate", "weight_decay", "early_stop_patience",
            "hidden_units", "input_size",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise TrainerError(f"{name} must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise TrainerError("dropout must be in [0, 1)")
        if self.epochs < 0:
            raise TrainerError("epochs must be non-negative")
        if self.epochs and self.epochs < self.early_stop_patience:
            raise TrainerError("epochs must be at least the early-stop patience")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


class EarlyStopTracker:
    """Stop after `patience` consecutive epochs without a strict
    improvement over the best validation loss seen so far."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = float("inf")
        self.stale = 0

    def update(self, val_loss: float) -> bool:
        if val_loss < self.best:
            self.best = val_loss
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


class BestCheckpointTracker:
    """Track the epoch with the highest validation accuracy; ties keep the
    earliest epoch."""

    def __init__(self):
        self.best_accuracy = -1.0
        self.best_epoch = 0

    def update(self, val_accuracy: float, epoch: int) -> bool:
        if val_accuracy > self.best_accuracy:
            self.best_accuracy = val_accuracy
            self.best_epoch = epoch
            return True
        return False


def build_backbone(pretrained: bool) -> nn.Module:
    """ResNet-18 backbone; falls back to random init when the pretrained
    weights cannot be fetched (e.g., offline), with a logged warning."""
    from torchvision.models import ResNet18_Weights, resnet18

    if pretrained:
        try:
            return resnet18(weights=ResNet18_Weights.IMAGENET1K_V1)
        except Exception as exc:  # weight download needs network access
            log.warning("pretrained weights unavailable (%s); using random init", exc)
    return resnet18(weights=None)


class SignClassifier(nn.Module):
    def __init__(self, n_classes: int, cfg: TrainConfig):
        super().__init__()
        backbone = build_backbone(cfg.pretrained)
        backbone.fc = nn.Identity()  # keep the pooled 512-feature output
        self.backbone = backbone
        self.head = nn.Sequential(
            nn.BatchNorm1d(512),
            nn.Linear(512, cfg.hidden_units),
            nn.ReLU(),
            nn.Dropout(cfg.dropout),
            nn.Linear(cfg.hidden_units, n_classes),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.backbone(x))


def load_index(path: str | Path) -> dict:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if "items" not in data:
        raise TrainerError(f"{path} is not an image index")
    return data


def _to_tensor(image: Image.Image, cfg: TrainConfig) -> torch.Tensor:
    width, height = image.size
    if width >= cfg.input_size or height >= cfg.input_size:
        log.warning(
            "image %dx%d is not smaller than the %d network input; resizing "
            "will not be pure upsampling", width, height, cfg.input_size,
        )
    resample = Image.BILINEAR if cfg.resize_mode == "bilinear" else Image.NEAREST
    resized = image.resize((cfg.input_size, cfg.input_size), resample)
    array = np.asarray(resized, dtype=np.float32) / 255.0
    array = (array - np.array(IMAGENET_MEAN, dtype=np.float32)) / np.array(
        IMAGENET_STD, dtype=np.float32
    )
    return torch.from_numpy(array.transpose(2, 0, 1))


def load_images(base: Path, items: list[dict], cfg: TrainConfig) -> torch.Tensor:
    tensors = []
    for item in items:
        with Image.open(base / item["image"]) as img:
            tensors.append(_to_tensor(img.convert("RGB"), cfg))
    return torch.stack(tensors)


def _labels_tensor(items: list[dict], classes: list[str]) -> torch.Tensor:
    index = {c: i for i, c in enumerate(classes)}
    return torch.tensor([index[item["label"]] for item in items], dtype=torch.long)


def _encode_augmented_epoch(
    experiment_config: Path, video_ids: list[str], epoch: int, out_dir: Path
) -> Path:
    """Re-encode the training videos with this epoch's augmentation stream
    by invoking the pipeline CLI; returns the fresh index path."""
    exp = json.loads(experiment_config.read_text(encoding="utf-8"))
    manifest_path = Path(exp["manifest_path"])
    if not manifest_path.is_absolute():
        manifest_path = experiment_config.parent / manifest_path
    argv = [
        sys.executable, "-m", "skelsign.cli", "encode",
        "--manifest", str(manifest_path),
        "--strategy", exp.get("strategy", "arcanjo"),
        "--out", str(out_dir),
        "--videos", ",".join(video_ids),
        "--epoch", str(epoch),
    ]
    impute = exp.get("impute")
    if impute is None:
        argv.append("--no-impute")
    else:
        argv += ["--window", str(impute.get("window", 5))]
        argv += ["--cubic-min-points", str(impute.get("cubic_min_points", 4))]
        if impute.get("allow_extrapolation"):
            argv.append("--allow-extrapolation")
    augment = exp.get("augment")
    if augment is not None:
        aug_path = out_dir / "augment_config.json"
        out_dir.mkdir(parents=True, exist_ok=True)
        aug_path.write_text(json.dumps(augment), encoding="utf-8")
        argv += ["--augment-config", str(aug_path)]
    encoding = exp.get("encoding") or {}
    if encoding.get("pad_policy"):
        argv += ["--pad-policy", encoding["pad_policy"]]
    result = subprocess.run(argv, capture_output=True, text=True)
    if result.returncode != 0:
        raise TrainerError(
            f"augmented encode failed (exit {result.returncode}): {result.stderr.strip()}"
        )
    return out_dir / "index.json"


@dataclass
class TrainResult:
    checkpoint_path: Path
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_val_accuracy: float = 0.0
    stopped_early: bool = False


def _iterate_batches(n: int, batch_size: int, generator: torch.Generator):
    order = torch.randperm(n, generator=generator)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def _recalibrate_bn(model: nn.Module, train_x: torch.Tensor, batch_size: int) -> None:
    """Recompute batch-norm running statistics from the current weights.

    With few batches per epoch the default EMA statistics lag behind the
    training weights, so eval-mode outputs diverge from train-mode ones;
    a cumulative pass over the training set keeps validation honest. With
    a pretrained, converged backbone this is a near no-op.
    """
    saved = []
    for module in model.modules():
        if isinstance(module, nn.modules.batchnorm._BatchNorm):
            saved.append((module, module.momentum))
            module.reset_running_stats()
            module.momentum = None  # cumulative moving average
    if not saved:
        return
    model.train()
    with torch.no_grad():
        for start in range(0, len(train_x), batch_size):
            model(train_x[start : start + batch_size])
    for module, momentum in saved:
        module.momentum = momentum


def train(
    session: dict,
    index_path: str | Path,
    cfg: TrainConfig,
    out_dir: str | Path,
    *,
    experiment_config: str | Path | None = None,
) -> TrainResult:
    """Train one LOPO session and save the best checkpoint plus the
    validation curve under `out_dir`.

    `session` carries the signer partition (`test`, `val`, `train` keys);
    the index supplies every encoded image with its signer and label. With
    `experiment_config` given, the training split is re-encoded per epoch
    with augmentation; otherwise the stored images are used as-is.
    """
    index_path = Path(index_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if experiment_config is not None:
        exp = json.loads(Path(experiment_config).read_text(encoding="utf-8"))
        if exp.get("augment") is None:
            # Nothing to re-sample per epoch; train on the stored images.
            experiment_config = None
    index = load_index(index_path)
    items = index["items"]
    classes = sorted({item["label"] for item in items})

    train_signers = set(session["train"])
    train_items = [it for it in items if it["signer_id"] in train_signers]
    val_items = [it for it in items if it["signer_id"] == session["val"]]
    if not train_items or not val_items:
        raise TrainerError("session has an empty train or validation partition")

    torch.manual_seed(cfg.seed)
    np.random.seed(cfg.seed % (2**32))
    model = SignClassifier(len(classes), cfg)
    optimizer = torch.optim.Adam(
        model.parameters(), lr=cfg.learning_rate, weight_decay=cfg.weight_decay
    )
    criterion = nn.CrossEntropyLoss()

    base = index_path.parent
    val_x = load_images(base, val_items, cfg)
    val_y = _labels_tensor(val_items, classes)
    static_train_x = None
    if experiment_config is None:
        static_train_x = load_images(base, train_items, cfg)
    train_y = _labels_tensor(train_items, classes)
    train_ids = [it["video_id"] for it in train_items]

    best = BestCheckpointTracker()
    stopper = EarlyStopTracker(cfg.early_stop_patience)
    best_state = copy.deepcopy(model.state_dict())
    history: list[dict] = []
    stopped_early = False
    batch_rng = torch.Generator().manual_seed(cfg.seed)

    for epoch in range(1, cfg.epochs + 1):
        if experiment_config is not None:
            with tempfile.TemporaryDirectory(prefix=f"epoch{epoch}_") as tmp:
                epoch_index = _encode_augmented_epoch(
                    Path(experiment_config), train_ids, epoch, Path(tmp)
                )
                epoch_items = load_index(epoch_index)["items"]
                by_id = {it["video_id"]: it for it in epoch_items}
                ordered = [by_id[vid] for vid in train_ids]
                train_x = load_images(epoch_index.parent, ordered, cfg)
        else:
            train_x = static_train_x

        model.train()
        epoch_loss = 0.0
        for batch in _iterate_batches(len(train_items), cfg.batch_size, batch_rng):
            optimizer.zero_grad()
            logits = model(train_x[batch])
            loss = criterion(logits, train_y[batch])
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach()) * len(batch)
        epoch_loss /= len(train_items)

        _recalibrate_bn(model, train_x, cfg.batch_size)
        model.eval()
        with torch.no_grad():
            val_logits = model(val_x)
            val_loss = float(criterion(val_logits, val_y))
            val_accuracy = float((val_logits.argmax(dim=1) == val_y).float().mean())

        history.append(
            {
                "epoch": epoch,
                "train_loss": epoch_loss,
                "val_loss": val_loss,
                "val_accuracy": val_accuracy,
            }
        )
        log.info(
            "epoch %d: train loss %.4f, val loss %.4f, val acc %.3f",
            epoch, epoch_loss, val_loss, val_accuracy,
        )
        if best.update(val_accuracy, epoch):
            best_state = copy.deepcopy(model.state_dict())
        if stopper.update(val_loss):
            stopped_early = True
            log.info("early stop after %d stale epochs", stopper.patience)
            break

    checkpoint_path = out_dir / "checkpoint.pt"
    torch.save(
        {
            "state_dict": best_state,
            "classes": classes,
            "config": cfg.to_dict(),
            "best_epoch": best.best_epoch,
            "best_val_accuracy": max(best.best_accuracy, 0.0),
            "history": history,
            "session": session,
        },
        checkpoint_path,
    )
    (out_dir / "history.json").write_text(
        json.dumps(
            {
                "history": history,
                "best_epoch": best.best_epoch,
                "best_val_accuracy": max(best.best_accuracy, 0.0),
                "stopped_early": stopped_early,
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    return TrainResult(
        checkpoint_path=checkpoint_path,
        history=history,
        best_epoch=best.best_epoch,
        best_val_accuracy=max(best.best_accuracy, 0.0),
        stopped_early=stopped_early,
    )


def load_checkpoint(path: str | Path) -> tuple[SignClassifier, list[str], TrainConfig]:
    payload = torch.load(Path(path), map_location="cpu", weights_only=False)
    cfg = TrainConfig(**payload["config"])
    classes = list(payload["classes"])
    # The saved weights override the backbone entirely, so skip the
    # pretrained initialization here.
    model = SignClassifier(len(classes), dataclasses.replace(cfg, pretrained=False))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, classes, cfg


def predict(
    checkpoint: str | Path, index_path: str | Path, items: list[dict] | None = None
) -> list[str]:
    """Predict a label for every index item (or the given subset), in order.

    The index labels must be covered by the checkpoint's class set.
    """
    index_path = Path(index_path)
    index = load_index(index_path)
    if items is None:
        items = index["items"]
    model, classes, cfg = load_checkpoint(checkpoint)
    unknown = {it["label"] for it in items} - set(classes)
    if unknown:
        raise TrainerError(f"index labels {sorted(unknown)} not in checkpoint classes")
    if not items:
        return []
    images = load_images(index_path.parent, items, cfg)
    with torch.no_grad():
        logits = model(images)
        picks = logits.argmax(dim=1).tolist()
    return [classes[i] for i in picks]
