import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from signmodels.extractor import FACE_POINTS, HAND_POINTS, POSE_POINTS, FrameLandmarks


def run_pipeline_cli(*argv) -> subprocess.CompletedProcess:
    """Invoke the encoding pipeline's CLI; the only way these tests touch it."""
    return subprocess.run(
        [sys.executable, "-m", "skelsign.cli", *map(str, argv)],
        capture_output=True,
        text=True,
    )


@pytest.fixture(scope="session")
def mini_dataset(tmp_path_factory):
    """Small synthetic dataset encoded to skeleton images: 3 classes x 6
    samples over 3 signers."""
    root = tmp_path_factory.mktemp("mini")
    data = root / "data"
    proc = run_pipeline_cli(
        "synth", "--out", data, "--samples-per-class", 6, "--signers", 3,
        "--frames", 24, "--dropout", "0.1", "--seed", 13,
    )
    assert proc.returncode == 0, proc.stderr
    images = root / "imgs"
    proc = run_pipeline_cli(
        "encode", "--manifest", data / "manifest.json",
        "--strategy", "asl-2nd", "--out", images,
    )
    assert proc.returncode == 0, proc.stderr
    return {
        "root": root,
        "manifest": data / "manifest.json",
        "index": images / "index.json",
        "session": {"test": "s2", "val": "s1", "train": ["s0"]},
    }


class ScriptedBackend:
    """Deterministic fake detector: a dot orbiting the frame center, with
    articulators dropped on a fixed schedule."""

    name = "scripted-1.0"

    def __init__(self, drop_hands_on_odd=False, face_every=1, overshoot=False):
        self.drop_hands_on_odd = drop_hands_on_odd
        self.face_every = face_every
        self.overshoot = overshoot
        self.calls = 0
        self.closed = False

    @staticmethod
    def _cloud(count, cx, cy, radius=0.02):
        angles = np.linspace(0.0, 2 * np.pi, count, endpoint=False)
        return np.stack(
            [cx + radius * np.cos(angles), cy + radius * np.sin(angles)], axis=1
        )

    def process(self, frame_rgb):
        i = self.calls
        self.calls += 1
        cx = 0.5 + 0.2 * np.cos(i / 5.0)
        cy = 0.5 + 0.2 * np.sin(i / 5.0)
        if self.overshoot:
            cx = 1.1  # detectors may report slightly out-of-frame points
        hands_gone = self.drop_hands_on_odd and i % 2 == 1
        return FrameLandmarks(
            face=self._cloud(FACE_POINTS, 0.5, 0.25) if i % self.face_every == 0 else None,
            pose=self._cloud(POSE_POINTS, 0.5, 0.55),
            left_hand=None if hands_gone else self._cloud(HAND_POINTS, cx - 0.1, cy),
            right_hand=None if hands_gone else self._cloud(HAND_POINTS, cx + 0.1, cy),
        )

    def close(self):
        self.closed = True


@pytest.fixture
def tiny_video(tmp_path):
    import cv2

    path = tmp_path / "clip.avi"
    writer = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*"MJPG"), 15, (64, 48))
    for i in range(12):
        frame = np.full((48, 64, 3), (i * 17) % 255, dtype=np.uint8)
        writer.write(frame)
    writer.release()
    return path


def write_session(path: Path, session: dict) -> Path:
    path.write_text(json.dumps(session), encoding="utf-8")
    return path
