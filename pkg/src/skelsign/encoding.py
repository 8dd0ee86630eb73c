"""2-D skeleton-image encoding of landmark sequences.

Given L landmarks and T frames, the x and y coordinates form two L x T
matrices. Frame columns are grouped in consecutive triples into the three
channels of an image column, so each half is L x ceil(T/3) x 3; the x half
and y half are concatenated horizontally into one L x 2*ceil(T/3) x 3
image. Coordinates quantize to 8-bit with round-half-up. Residual missing
values are materialized as 0.0 here, and only here.
"""

from __future__ import annotations

import concurrent.futures
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .augmentation import AugmentConfig, augment, sample_key_for
from .errors import SkelsignError, ValidationError
from .imputation import ImputeConfig, ImputeStats, impute_sequence
from .landmarks import DatasetManifest, LandmarkSequence, iter_dataset_sequences
from .selection import SelectionManifest, apply_selection

PAD_POLICIES = ("zero_pad", "repeat_last")


@dataclass(frozen=True)
class EncodingSpec:
    pad_policy: str = "zero_pad"
    quantization: str = "round_255"

    def __post_init__(self):
        if self.pad_policy not in PAD_POLICIES:
            raise ValidationError(f"unknown pad_policy '{self.pad_policy}'")
        if self.quantization != "round_255":
            raise ValidationError(f"unknown quantization '{self.quantization}'")

    def to_dict(self) -> dict:
        return {"pad_policy": self.pad_policy, "quantization": self.quantization}

    @classmethod
    def from_dict(cls, data: dict) -> "EncodingSpec":
        return cls(
            pad_policy=str(data.get("pad_policy", "zero_pad")),
            quantization=str(data.get("quantization", "round_255")),
        )


@dataclass(frozen=True)
class SkeletonImage:
    """Quantized 3-channel image encoding one sequence."""

    pixels: np.ndarray
    video_id: str
    strategy: str
    frame_count: int
    landmark_count: int

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.uint8)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise ValidationError(f"pixels must have shape (H, W, 3), got {pixels.shape}")
        pixels = pixels.copy()
        pixels.flags.writeable = False
        object.__setattr__(self, "pixels", pixels)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def save_png(self, path: str | Path) -> None:
        Image.fromarray(np.asarray(self.pixels), mode="RGB").save(Path(path), format="PNG")


def quantize_unit(values: np.ndarray) -> np.ndarray:
    """Map [0, 1] floats to 0..255 with round-half-up (0.5*255 -> 128)."""
    return np.floor(np.clip(values, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def encode(
    seq: LandmarkSequence,
    spec: EncodingSpec = EncodingSpec(),
    *,
    strategy: str = "",
) -> SkeletonImage:
    """Encode a (selected, imputed) sequence into a skeleton image."""
    l, t = seq.landmark_count, seq.frame_count
    if l == 0 or t == 0:
        raise ValidationError(f"cannot encode empty input (L={l}, T={t})")

    groups = math.ceil(t / 3)
    halves = []
    for axis in (0, 1):
        plane = np.nan_to_num(seq.coords[:, :, axis], nan=0.0).T  # (L, T)
        if t < 3 * groups:
            if spec.pad_policy == "zero_pad":
                pad = np.zeros((l, 3 * groups - t))
            else:
                pad = np.repeat(plane[:, -1:], 3 * groups - t, axis=1)
            plane = np.concatenate([plane, pad], axis=1)
        halves.append(plane.reshape(l, groups, 3))

    pixels = quantize_unit(np.concatenate(halves, axis=1))
    return SkeletonImage(
        pixels=pixels,
        video_id=seq.video_id,
        strategy=strategy,
        frame_count=t,
        landmark_count=l,
    )


def _safe_filename(video_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", video_id)


def _prepare_one(
    seq: LandmarkSequence,
    selection: SelectionManifest,
    impute_cfg: ImputeConfig | None,
    spec: EncodingSpec,
    augment_cfg: AugmentConfig | None,
    epoch: int,
) -> tuple[SkeletonImage, ImputeStats | None]:
    selected = apply_selection(seq, selection)
    stats = None
    if impute_cfg is not None:
        selected, stats = impute_sequence(selected, impute_cfg)
    if augment_cfg is not None:
        selected = augment(
            selected, augment_cfg, sample_key_for(seq.video_id), epoch=epoch
        )
    return encode(selected, spec, strategy=selection.name), stats


def encode_dataset(
    manifest: DatasetManifest,
    selection: SelectionManifest,
    impute_cfg: ImputeConfig | None,
    spec: EncodingSpec,
    out_dir: str | Path,
    *,
    augment_cfg: AugmentConfig | None = None,
    epoch: int = 0,
    video_ids: list[str] | None = None,
    workers: int = 1,
) -> dict:
    """Encode every (video, repetition) of a dataset into PNGs plus an index.

    Writes `<out_dir>/index.json` with one item per image (path, label,
    signer_id, video_id, strategy) sorted by video_id, plus any per-file
    failures. Output is deterministic given identical inputs; pass
    `impute_cfg=None` to skip imputation and `augment_cfg` to encode an
    augmented variant (epoch feeds the RNG stream).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    wanted = set(video_ids) if video_ids is not None else None
    entries = [
        e for e in manifest.entries if wanted is None or e.video_id in wanted
    ]
    items: list[dict] = []
    failures: list[dict] = []
    totals = ImputeStats()

    def process_entry(entry) -> tuple[list[dict], list[ImputeStats], list[dict]]:
        sub_manifest = DatasetManifest(
            entries=(entry,),
            cut_points=tuple(manifest.cuts_for(entry.video_id)),
        )
        entry_items: list[dict] = []
        entry_stats: list[ImputeStats] = []
        entry_failures: list[dict] = []
        try:
            sequences = list(iter_dataset_sequences(sub_manifest))
        except SkelsignError as exc:
            return [], [], [{"video_id": entry.video_id, "error": str(exc)}]
        for seq in sequences:
            try:
                image, stats = _prepare_one(
                    seq, selection, impute_cfg, spec, augment_cfg, epoch
                )
                filename = _safe_filename(seq.video_id) + ".png"
                image.save_png(out_dir / filename)
                entry_items.append(
                    {
                        "image": filename,
                        "label": seq.label,
                        "signer_id": seq.signer_id,
                        "video_id": seq.video_id,
                        "strategy": selection.name,
                    }
                )
                if stats is not None:
                    entry_stats.append(stats)
            except SkelsignError as exc:
                entry_failures.append({"video_id": seq.video_id, "error": str(exc)})
        return entry_items, entry_stats, entry_failures

    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(process_entry, entries))
    else:
        results = [process_entry(entry) for entry in entries]

    for entry_items, entry_stats, entry_failures in results:
        items.extend(entry_items)
        failures.extend(entry_failures)
        for stats in entry_stats:
            totals.merge(stats)

    items.sort(key=lambda it: it["video_id"])
    failures.sort(key=lambda f: f["video_id"])
    index = {"items": items, "failures": failures}
    if impute_cfg is not None:
        index["impute_stats"] = totals.to_dict()
    (out_dir / "index.json").write_text(
        json.dumps(index, indent=2) + "\n", encoding="utf-8"
    )
    return index


def load_index(path: str | Path) -> dict:
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    if "items" not in data:
        raise ValidationError(f"{path} is not an image index (missing 'items')")
    return data


def load_index_images(index_path: str | Path, items: list[dict]) -> list[np.ndarray]:
    """Load the pixel arrays for index items (paths relative to the index)."""
    base = Path(index_path).parent
    images = []
    for item in items:
        with Image.open(base / item["image"]) as img:
            images.append(np.asarray(img.convert("RGB"), dtype=np.uint8))
    return images
