"""Geometric augmentation of landmark sequences, applied before encoding.

One transform set is sampled per call from an RNG stream derived from
(seed, sample_key, epoch), so identical keys reproduce identical outputs.
Transforms apply in a fixed order: horizontal flip, rotation about the
frame center (0.5, 0.5), zoom about the center, translation; results are
clamped to [0, 1]. Missing entries stay missing.

A horizontal flip mirrors the body, so the left and right hand series are
swapped and the paired pose points (eyes, ears, shoulders, ..., feet) are
exchanged via the mirror map below. Dense face points keep their ids; a
custom mirror map can be passed for manifests that need finer control.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .landmarks import LandmarkId, LandmarkSequence, Part

# Left/right pose counterparts of the 33-point pose schema; the nose (0)
# is its own mirror.
POSE_MIRROR_PAIRS: tuple[tuple[int, int], ...] = (
    (1, 4), (2, 5), (3, 6), (7, 8), (9, 10), (11, 12), (13, 14), (15, 16),
    (17, 18), (19, 20), (21, 22), (23, 24), (25, 26), (27, 28), (29, 30),
    (31, 32),
)
_POSE_MIRROR: dict[int, int] = {}
for _a, _b in POSE_MIRROR_PAIRS:
    _POSE_MIRROR[_a] = _b
    _POSE_MIRROR[_b] = _a

_HAND_MIRROR = {Part.LEFT_HAND: Part.RIGHT_HAND, Part.RIGHT_HAND: Part.LEFT_HAND}


def mirror_id(lid: LandmarkId) -> LandmarkId:
    """Identifier a landmark maps to under a horizontal body flip."""
    if lid.part in _HAND_MIRROR:
        return LandmarkId(_HAND_MIRROR[lid.part], lid.index)
    if lid.part is Part.POSE:
        return LandmarkId(Part.POSE, _POSE_MIRROR.get(lid.index, lid.index))
    return lid


def mirror_permutation(
    ids: tuple[LandmarkId, ...],
    mirror_map: dict[LandmarkId, LandmarkId] | None = None,
) -> np.ndarray:
    """Index permutation that realizes the flip's id swap on a sequence.

    Ids whose mirror counterpart is absent from `ids` map to themselves.
    """
    mapping = mirror_map if mirror_map is not None else {}
    positions = {lid: i for i, lid in enumerate(ids)}
    perm = np.arange(len(ids))
    for i, lid in enumerate(ids):
        target = mapping[lid] if lid in mapping else mirror_id(lid)
        perm[i] = positions.get(target, i)
    return perm


def sample_key_for(video_id: str) -> int:
    """Stable non-negative per-video key for the augmentation RNG stream."""
    digest = hashlib.sha256(video_id.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class AugmentConfig:
    """Transform ranges; all defaults are conservative assumptions, not
    values taken from any particular training setup."""

    rotation_deg: float = 10.0
    zoom: tuple[float, float] = (0.9, 1.1)
    translation: float = 0.05
    hflip_prob: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.rotation_deg < 0:
            raise ValidationError("rotation_deg must be non-negative")
        lo, hi = self.zoom
        if not 0 < lo <= hi:
            raise ValidationError(f"zoom range {self.zoom} is not well-ordered")
        if self.translation < 0:
            raise ValidationError("translation must be non-negative")
        if not 0.0 <= self.hflip_prob <= 1.0:
            raise ValidationError("hflip_prob must be in [0, 1]")
        if self.seed < 0:
            raise ValidationError("seed must be non-negative")
        object.__setattr__(self, "zoom", (float(lo), float(hi)))

    @property
    def is_identity(self) -> bool:
        return (
            self.rotation_deg == 0.0
            and self.zoom == (1.0, 1.0)
            and self.translation == 0.0
            and self.hflip_prob == 0.0
        )

    def to_dict(self) -> dict:
        return {
            "rotation_deg": self.rotation_deg,
            "zoom": list(self.zoom),
            "translation": self.translation,
            "hflip_prob": self.hflip_prob,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AugmentConfig":
        return cls(
            rotation_deg=float(data.get("rotation_deg", 10.0)),
            zoom=tuple(data.get("zoom", (0.9, 1.1))),
            translation=float(data.get("translation", 0.05)),
            hflip_prob=float(data.get("hflip_prob", 0.5)),
            seed=int(data.get("seed", 0)),
        )

    @classmethod
    def identity(cls, seed: int = 0) -> "AugmentConfig":
        return cls(rotation_deg=0.0, zoom=(1.0, 1.0), translation=0.0, hflip_prob=0.0, seed=seed)


def apply_transform(
    seq: LandmarkSequence,
    *,
    flip: bool = False,
    angle_deg: float = 0.0,
    zoom: float = 1.0,
    shift: tuple[float, float] = (0.0, 0.0),
    mirror_map: dict[LandmarkId, LandmarkId] | None = None,
) -> LandmarkSequence:
    """Apply a fixed transform set: flip, then rotation about (0.5, 0.5),
    then zoom about the center, then translation, then clamp to [0, 1]."""
    coords = np.array(seq.coords)
    missing = np.array(seq.missing)

    if flip:
        coords[:, :, 0] = 1.0 - coords[:, :, 0]
        perm = mirror_permutation(seq.ids, mirror_map)
        coords = coords[:, perm]
        missing = missing[:, perm]

    center = np.array([0.5, 0.5])
    angle = np.deg2rad(angle_deg)
    cos_a, sin_a = np.cos(angle), np.sin(angle)
    rot = np.array([[cos_a, -sin_a], [sin_a, cos_a]])
    coords = (coords - center) @ rot.T + center
    coords = (coords - center) * zoom + center
    coords = coords + np.asarray(shift)

    coords = np.clip(coords, 0.0, 1.0)
    coords[missing] = np.nan
    return seq.replace(coords=coords, missing=missing)


def augment(
    seq: LandmarkSequence,
    cfg: AugmentConfig,
    sample_key: int,
    *,
    epoch: int = 0,
    mirror_map: dict[LandmarkId, LandmarkId] | None = None,
) -> LandmarkSequence:
    """Apply one randomly sampled transform set to a sequence.

    T and the landmark set are unchanged: exactly one output per input.
    """
    rng = np.random.default_rng([cfg.seed, int(sample_key), int(epoch)])
    do_flip = bool(rng.random() < cfg.hflip_prob)
    angle = rng.uniform(-cfg.rotation_deg, cfg.rotation_deg)
    zoom = rng.uniform(cfg.zoom[0], cfg.zoom[1])
    shift = rng.uniform(-cfg.translation, cfg.translation, size=2)
    return apply_transform(
        seq,
        flip=do_flip,
        angle_deg=angle,
        zoom=zoom,
        shift=(shift[0], shift[1]),
        mirror_map=mirror_map,
    )
