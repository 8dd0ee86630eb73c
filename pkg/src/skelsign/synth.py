"""Synthetic signing-like trajectory datasets for tests and smoke runs.

Each sample is a full 543-landmark sequence of a static upper body whose
right hand traces a class-specific path: a circle, a straight line, or a
zig-zag. Signers differ by a reproducible style (offset, scale, speed),
samples by per-frame jitter. Optional detection dropout knocks out whole
articulators (face, pose, or one hand) for a frame, the way a tracker
loses them, producing the missing runs the imputation stage targets.
"""

from __future__ import annotations

import zlib
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .landmarks import (
    ALL_LANDMARK_IDS,
    PART_SIZES,
    DatasetManifest,
    LandmarkSequence,
    ManifestEntry,
    Part,
    write_sequence,
)

DEFAULT_CLASSES = ("circle", "line", "zigzag")

_PART_SLICES = {}
_offset = 0
for _part in (Part.FACE, Part.POSE, Part.LEFT_HAND, Part.RIGHT_HAND):
    _PART_SLICES[_part] = slice(_offset, _offset + PART_SIZES[_part])
    _offset += PART_SIZES[_part]


def _trajectory(label: str, s: np.ndarray) -> np.ndarray:
    """Path of the right hand for phase values s in [0, 1]; shape (T, 2)."""
    if label == "circle":
        angle = 2 * np.pi * s
        return np.stack(
            [0.62 + 0.13 * np.cos(angle), 0.55 + 0.13 * np.sin(angle)], axis=1
        )
    if label == "line":
        return np.stack([0.35 + 0.4 * s, 0.75 - 0.35 * s], axis=1)
    if label == "zigzag":
        tri = 2.0 * np.abs(3.0 * s - np.floor(3.0 * s + 0.5))
        return np.stack([0.35 + 0.4 * s, 0.45 + 0.25 * tri], axis=1)
    raise ValidationError(f"unknown trajectory class '{label}'")


def _static_body(rng: np.random.Generator) -> np.ndarray:
    """Base layout for all 543 landmarks of a neutral upper body."""
    base = np.zeros((543, 2))
    face = _PART_SLICES[Part.FACE]
    angles = np.linspace(0.0, 2 * np.pi, PART_SIZES[Part.FACE], endpoint=False)
    radii = 0.06 + 0.05 * rng.random(PART_SIZES[Part.FACE])
    base[face, 0] = 0.5 + radii * np.cos(angles)
    base[face, 1] = 0.22 + 0.8 * radii * np.sin(angles)

    pose = _PART_SLICES[Part.POSE].start
    spread = np.linspace(-0.18, 0.18, PART_SIZES[Part.POSE])
    base[pose : pose + 33, 0] = 0.5 + spread
    base[pose : pose + 33, 1] = 0.45 + 0.25 * rng.random(33)

    for part, cx in ((Part.LEFT_HAND, 0.36), (Part.RIGHT_HAND, 0.64)):
        sl = _PART_SLICES[part]
        base[sl, 0] = cx + 0.04 * (rng.random(21) - 0.5)
        base[sl, 1] = 0.72 + 0.04 * (rng.random(21) - 0.5)
    return base


def synthesize_sequence(
    label: str,
    signer_index: int,
    sample_index: int,
    *,
    frames: int = 45,
    dropout: float = 0.0,
    noise: float = 0.008,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Coordinates (T, 543, 2) and missing mask (T, 543) for one sample."""
    rng = np.random.default_rng(
        [seed, signer_index, sample_index, zlib.crc32(label.encode("utf-8"))]
    )
    style = np.random.default_rng([seed, signer_index])
    body = _static_body(style)
    offset = style.uniform(-0.03, 0.03, size=2)
    scale = style.uniform(0.92, 1.08)

    s = np.linspace(0.0, 1.0, frames)
    path = _trajectory(label, s)
    coords = np.repeat(body[None, :, :], frames, axis=0)

    right = _PART_SLICES[Part.RIGHT_HAND]
    finger_shape = coords[0, right] - coords[0, right].mean(axis=0)
    coords[:, right] = path[:, None, :] + finger_shape[None, :, :]
    # The pose wrist and elbow trail the moving hand.
    pose0 = _PART_SLICES[Part.POSE].start
    coords[:, pose0 + 16] = path
    coords[:, pose0 + 14] = 0.65 * path + 0.35 * coords[:, pose0 + 14]

    coords = (coords - 0.5) * scale + 0.5 + offset
    coords += rng.normal(0.0, noise, size=coords.shape)
    coords = np.clip(coords, 0.0, 1.0)

    missing = np.zeros((frames, 543), dtype=bool)
    if dropout > 0.0:
        for part in (Part.FACE, Part.POSE, Part.LEFT_HAND, Part.RIGHT_HAND):
            lost = rng.random(frames) < dropout
            missing[lost, _PART_SLICES[part]] = True
    coords[missing] = np.nan
    return coords, missing


def make_synthetic_dataset(
    out_dir: str | Path,
    *,
    classes: tuple[str, ...] = DEFAULT_CLASSES,
    samples_per_class: int = 20,
    signers: int = 4,
    frames: int = 45,
    dropout: float = 0.0,
    noise: float = 0.008,
    seed: int = 0,
) -> DatasetManifest:
    """Write a synthetic dataset (CSVs + manifest.json) and return its manifest.

    Samples of each class are distributed round-robin across signers, so
    every signer performs every class and LOPO splits stay balanced.
    """
    if signers < 1:
        raise ValidationError("signers must be positive")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    entries = []
    for label in classes:
        for k in range(samples_per_class):
            signer_index = k % signers
            coords, missing = synthesize_sequence(
                label,
                signer_index,
                k,
                frames=frames,
                dropout=dropout,
                noise=noise,
                seed=seed,
            )
            video_id = f"{label}_{k:03d}"
            seq = LandmarkSequence(
                video_id=video_id,
                signer_id=f"s{signer_index}",
                label=label,
                ids=ALL_LANDMARK_IDS,
                coords=coords,
                missing=missing,
            )
            path = out_dir / f"{video_id}.csv"
            write_sequence(seq, path)
            entries.append(
                ManifestEntry(
                    video_id=video_id,
                    signer_id=seq.signer_id,
                    label=label,
                    path=path,
                )
            )

    manifest = DatasetManifest(entries=tuple(entries))
    manifest.to_json(out_dir / "manifest.json")
    return manifest
