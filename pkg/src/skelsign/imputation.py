"""Short-window spline imputation of missing landmark values.

Each landmark-coordinate series is treated as an independent function of
the frame index. A gap (run of consecutive missing frames with observed
values on both sides) no longer than the window is filled by a natural
cubic spline through the nearest observed frames (up to `window` of them
on each side) when at least `cubic_min_points` are available, and by
linear interpolation between the nearest neighbors otherwise. Gaps wider
than the window are bridged linearly to avoid long-range cubic
oscillation. Leading and trailing gaps are never extrapolated by default.

Observed values are never modified, so the operation is idempotent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ValidationError
from .landmarks import LandmarkSequence


@dataclass(frozen=True)
class ImputeConfig:
    window: int = 5
    cubic_min_points: int = 4
    allow_extrapolation: bool = False

    def __post_init__(self):
        if self.window < 2:
            raise ValidationError(f"window must be >= 2, got {self.window}")
        if self.cubic_min_points < 4:
            raise ValidationError(
                f"cubic_min_points must be >= 4, got {self.cubic_min_points}"
            )

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "cubic_min_points": self.cubic_min_points,
            "allow_extrapolation": self.allow_extrapolation,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ImputeConfig":
        return cls(
            window=int(data.get("window", 5)),
            cubic_min_points=int(data.get("cubic_min_points", 4)),
            allow_extrapolation=bool(data.get("allow_extrapolation", False)),
        )


@dataclass
class ImputeStats:
    """Per-coordinate fill counts (x and y count separately)."""

    filled_cubic: int = 0
    filled_linear: int = 0
    left_missing: int = 0

    def merge(self, other: "ImputeStats") -> None:
        self.filled_cubic += other.filled_cubic
        self.filled_linear += other.filled_linear
        self.left_missing += other.left_missing

    def to_dict(self) -> dict:
        return {
            "filled_cubic": self.filled_cubic,
            "filled_linear": self.filled_linear,
            "left_missing": self.left_missing,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


def _linear_fill(frames: np.ndarray, t0: int, v0: np.ndarray, t1: int, v1: np.ndarray) -> np.ndarray:
    w = (frames - t0) / (t1 - t0)
    return v0 + np.outer(w, v1 - v0)


def impute_sequence(
    seq: LandmarkSequence, cfg: ImputeConfig = ImputeConfig()
) -> tuple[LandmarkSequence, ImputeStats]:
    """Fill interior gaps of every landmark series; returns (sequence, stats).

    The x and y series of a landmark share one missing mask, so both are
    filled (or left missing) together; stats count coordinates, not pairs.
    """
    coords = np.array(seq.coords)
    missing = np.array(seq.missing)
    stats = ImputeStats()
    t = seq.frame_count

    for j in range(seq.landmark_count):
        observed = np.flatnonzero(~missing[:, j])
        n_missing = int(missing[:, j].sum())
        if n_missing == 0:
            continue
        if observed.size == 0:
            stats.left_missing += n_missing * 2
            continue

        first, last = observed[0], observed[-1]
        if not cfg.allow_extrapolation:
            stats.left_missing += (int(first) + int(t - 1 - last)) * 2
        else:
            # Flat extension with the nearest observed value.
            if first > 0:
                coords[:first, j] = coords[first, j]
                missing[:first, j] = False
                stats.filled_linear += int(first) * 2
            if last < t - 1:
                coords[last + 1 :, j] = coords[last, j]
                missing[last + 1 :, j] = False
                stats.filled_linear += int(t - 1 - last) * 2

        for left, right in zip(observed, observed[1:]):
            gap = int(right - left - 1)
            if gap == 0:
                continue
            frames = np.arange(left + 1, right)
            if gap > cfg.window:
                filled = _linear_fill(frames, left, coords[left, j], right, coords[right, j])
                stats.filled_linear += gap * 2
            else:
                lo = observed[observed <= left][-cfg.window :]
                hi = observed[observed >= right][: cfg.window]
                support = np.concatenate([lo, hi])
                if support.size >= cfg.cubic_min_points:
                    spline = CubicSpline(support, coords[support, j], bc_type="natural")
                    filled = spline(frames)
                    stats.filled_cubic += gap * 2
                else:
                    filled = _linear_fill(
                        frames, left, coords[left, j], right, coords[right, j]
                    )
                    stats.filled_linear += gap * 2
            coords[left + 1 : right, j] = np.clip(filled, 0.0, 1.0)
            missing[left + 1 : right, j] = False

    result = seq.replace(coords=coords, missing=missing)
    return result, stats
