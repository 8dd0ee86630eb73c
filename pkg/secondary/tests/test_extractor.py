import csv
import importlib.util
import json

import pytest

from signmodels.extractor import (
    ExtractionError,
    ExtractorConfig,
    MediaPipeHolisticBackend,
    canonical_header,
    extract,
    iter_video_frames,
)

from conftest import ScriptedBackend, run_pipeline_cli


def read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


def test_config_validation():
    with pytest.raises(ValueError):
        ExtractorConfig(min_detection_confidence=1.5)
    with pytest.raises(ValueError):
        ExtractorConfig(min_tracking_confidence=-0.1)


def test_header_is_canonical_layout():
    header = canonical_header()
    assert len(header) == 1 + 2 * 543
    assert header[0] == "frame"
    assert header[1] == "face_0_x"
    assert header[2] == "face_0_y"
    assert header[-2] == "right_hand_20_x"
    assert header[-1] == "right_hand_20_y"


def test_row_count_equals_decoded_frames(tiny_video, tmp_path):
    out = tmp_path / "seq.csv"
    backend = ScriptedBackend()
    extract(tiny_video, ExtractorConfig(), out, backend=backend)
    header, rows = read_rows(out)
    assert header == canonical_header()
    assert len(rows) == 12
    assert [row[0] for row in rows] == [str(i) for i in range(12)]
    assert backend.calls == 12


def test_undetected_articulators_leave_empty_cells(tiny_video, tmp_path):
    out = tmp_path / "seq.csv"
    extract(tiny_video, ExtractorConfig(), out, backend=ScriptedBackend(drop_hands_on_odd=True))
    header, rows = read_rows(out)
    first_hand_col = header.index("left_hand_0_x")
    assert rows[1][first_hand_col] == ""
    assert all(cell == "" for cell in rows[1][first_hand_col:])
    assert rows[0][first_hand_col] != ""


def test_out_of_frame_points_are_clamped(tiny_video, tmp_path):
    out = tmp_path / "seq.csv"
    extract(tiny_video, ExtractorConfig(), out, backend=ScriptedBackend(overshoot=True))
    header, rows = read_rows(out)
    col = header.index("left_hand_0_x")
    assert float(rows[0][col]) <= 1.0


def test_output_validates_through_the_pipeline(tiny_video, tmp_path):
    out = tmp_path / "clip.csv"
    extract(tiny_video, ExtractorConfig(), out, backend=ScriptedBackend(drop_hands_on_odd=True))
    manifest = tmp_path / "manifest.json"
    manifest.write_text(
        json.dumps(
            {
                "entries": [
                    {"video_id": "clip", "signer_id": "s0", "label": "x", "path": "clip.csv"}
                ]
            }
        )
    )
    proc = run_pipeline_cli("ingest", "--manifest", manifest, "--out", tmp_path / "ingested")
    assert proc.returncode == 0, proc.stderr


def test_extraction_is_deterministic_given_a_deterministic_backend(tiny_video, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    extract(tiny_video, ExtractorConfig(), a, backend=ScriptedBackend())
    extract(tiny_video, ExtractorConfig(), b, backend=ScriptedBackend())
    assert a.read_bytes() == b.read_bytes()


def test_stamp_records_backend_and_thresholds(tiny_video, tmp_path):
    out = tmp_path / "seq.csv"
    cfg = ExtractorConfig(min_detection_confidence=0.4, min_tracking_confidence=0.4)
    extract(tiny_video, cfg, out, backend=ScriptedBackend(face_every=3))
    stamp = json.loads((tmp_path / "seq.csv.extract.json").read_text())
    assert stamp["backend"] == "scripted-1.0"
    assert stamp["frames"] == 12
    assert stamp["min_detection_confidence"] == 0.4
    assert stamp["detected_frames"]["face"] == 4  # every third frame
    assert stamp["detected_frames"]["pose"] == 12


def test_owned_backend_is_closed(tiny_video, tmp_path, monkeypatch):
    backend = ScriptedBackend()
    # When the backend is injected, extract must not close it.
    extract(tiny_video, ExtractorConfig(), tmp_path / "x.csv", backend=backend)
    assert backend.closed is False


def test_undecodable_video_raises(tmp_path):
    bogus = tmp_path / "not_a_video.avi"
    bogus.write_bytes(b"nothing")
    with pytest.raises(ExtractionError):
        list(iter_video_frames(bogus))


@pytest.mark.skipif(
    importlib.util.find_spec("mediapipe") is not None,
    reason="mediapipe installed; the real backend would initialize",
)
def test_missing_mediapipe_reports_clearly():
    with pytest.raises(ExtractionError, match="mediapipe"):
        MediaPipeHolisticBackend(ExtractorConfig())


@pytest.mark.skipif(
    importlib.util.find_spec("mediapipe") is None,
    reason="mediapipe not installed in this environment",
)
def test_real_backend_smoke(tiny_video, tmp_path):
    out = tmp_path / "real.csv"
    extract(tiny_video, ExtractorConfig(), out)
    _, rows = read_rows(out)
    assert len(rows) == 12
