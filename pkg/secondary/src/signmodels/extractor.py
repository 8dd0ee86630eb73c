"""Holistic landmark extraction from videos into canonical sequence CSVs.

Runs a full-body landmark detector frame by frame and emits one CSV row
per decoded frame in the 543-point canonical layout (face 0-467, pose
0-32, left_hand 0-20, right_hand 0-20; `<part>_<idx>_x,<part>_<idx>_y`
pairs). Only 2-D normalized coordinates are kept; depth and visibility
scores are discarded. Undetected articulators leave their cells empty.

The detector is pluggable: the default backend wraps MediaPipe Holistic
(imported lazily, so the rest of the package works without it installed),
and tests inject scripted backends.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Protocol

import cv2
import numpy as np

FACE_POINTS = 468
POSE_POINTS = 33
HAND_POINTS = 21
PART_LAYOUT = (
    ("face", FACE_POINTS),
    ("pose", POSE_POINTS),
    ("left_hand", HAND_POINTS),
    ("right_hand", HAND_POINTS),
)
TOTAL_POINTS = FACE_POINTS + POSE_POINTS + 2 * HAND_POINTS


class ExtractionError(Exception):
    """Video cannot be decoded or the detector cannot be initialized."""


@dataclass(frozen=True)
class ExtractorConfig:
    min_detection_confidence: float = 0.4
    min_tracking_confidence: float = 0.4
    static_image_mode: bool = False

    def __post_init__(self):
        for name in ("min_detection_confidence", "min_tracking_confidence"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")


@dataclass
class FrameLandmarks:
    """Per-articulator (N, 2) arrays of normalized coordinates; None when
    the articulator was not detected in the frame."""

    face: np.ndarray | None = None
    pose: np.ndarray | None = None
    left_hand: np.ndarray | None = None
    right_hand: np.ndarray | None = None

    def part(self, name: str) -> np.ndarray | None:
        return getattr(self, name)


class HolisticBackend(Protocol):
    """Detector interface: one RGB frame in, one FrameLandmarks out."""

    name: str

    def process(self, frame_rgb: np.ndarray) -> FrameLandmarks: ...

    def close(self) -> None: ...


class MediaPipeHolisticBackend:
    """MediaPipe Holistic wrapper; requires the `mediapipe` package."""

    def __init__(self, cfg: ExtractorConfig):
        try:
            import mediapipe as mp
        except ImportError as exc:
            raise ExtractionError(
                "the 'mediapipe' package is not installed; install "
                "signmodels[mediapipe] or inject another backend"
            ) from exc
        self.name = f"mediapipe-{getattr(mp, '__version__', 'unknown')}"
        self._holistic = mp.solutions.holistic.Holistic(
            static_image_mode=cfg.static_image_mode,
            min_detection_confidence=cfg.min_detection_confidence,
            min_tracking_confidence=cfg.min_tracking_confidence,
        )

    @staticmethod
    def _to_array(landmark_list, expected: int) -> np.ndarray | None:
        if landmark_list is None:
            return None
        points = np.array([(p.x, p.y) for p in landmark_list.landmark])
        if points.shape != (expected, 2):
            return None
        return points

    def process(self, frame_rgb: np.ndarray) -> FrameLandmarks:
        result = self._holistic.process(frame_rgb)
        return FrameLandmarks(
            face=self._to_array(result.face_landmarks, FACE_POINTS),
            pose=self._to_array(result.pose_landmarks, POSE_POINTS),
            left_hand=self._to_array(result.left_hand_landmarks, HAND_POINTS),
            right_hand=self._to_array(result.right_hand_landmarks, HAND_POINTS),
        )

    def close(self) -> None:
        self._holistic.close()


def canonical_header() -> list[str]:
    cols = ["frame"]
    for part, count in PART_LAYOUT:
        for i in range(count):
            cols.append(f"{part}_{i}_x")
            cols.append(f"{part}_{i}_y")
    return cols


def _frame_row(index: int, frame: FrameLandmarks) -> list[str]:
    row = [str(index)]
    for part, count in PART_LAYOUT:
        points = frame.part(part)
        if points is None:
            row.extend([""] * (2 * count))
            continue
        clipped = np.clip(points, 0.0, 1.0)
        for x, y in clipped:
            row.append(f"{x:.6f}")
            row.append(f"{y:.6f}")
    return row


def iter_video_frames(video: str | Path) -> Iterator[np.ndarray]:
    """Decode a video into RGB frames."""
    capture = cv2.VideoCapture(str(video))
    if not capture.isOpened():
        raise ExtractionError(f"cannot decode video: {video}")
    try:
        while True:
            ok, frame_bgr = capture.read()
            if not ok:
                break
            yield cv2.cvtColor(frame_bgr, cv2.COLOR_BGR2RGB)
    finally:
        capture.release()


def extract(
    video: str | Path,
    cfg: ExtractorConfig,
    out_csv: str | Path,
    *,
    backend: HolisticBackend | None = None,
) -> Path:
    """Extract landmarks from a video into a canonical sequence CSV.

    Writes one data row per decoded frame and a sidecar
    `<out>.extract.json` stamp recording the backend name/version and the
    detector thresholds (the upstream framework version matters for
    reproducibility). Returns the CSV path.
    """
    out_csv = Path(out_csv)
    owns_backend = backend is None
    if backend is None:
        backend = MediaPipeHolisticBackend(cfg)
    frames = 0
    detected = {part: 0 for part, _ in PART_LAYOUT}
    try:
        with out_csv.open("w", newline="\n", encoding="utf-8") as fh:
            fh.write(",".join(canonical_header()) + "\n")
            for index, frame_rgb in enumerate(iter_video_frames(video)):
                landmarks = backend.process(frame_rgb)
                for part, _ in PART_LAYOUT:
                    if landmarks.part(part) is not None:
                        detected[part] += 1
                fh.write(",".join(_frame_row(index, landmarks)) + "\n")
                frames += 1
    finally:
        if owns_backend:
            backend.close()

    stamp = {
        "video": str(video),
        "frames": frames,
        "backend": backend.name,
        "min_detection_confidence": cfg.min_detection_confidence,
        "min_tracking_confidence": cfg.min_tracking_confidence,
        "detected_frames": detected,
    }
    out_csv.with_suffix(out_csv.suffix + ".extract.json").write_text(
        json.dumps(stamp, indent=2) + "\n", encoding="utf-8"
    )
    return out_csv
