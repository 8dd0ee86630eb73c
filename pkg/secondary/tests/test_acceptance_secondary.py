"""Acceptance: the trainer smoke test on the synthetic trajectory dataset.

Builds the dataset and images through the pipeline CLI, trains one LOPO
session for up to 30 epochs under the full training protocol (per-epoch
sequence augmentation included), and checks the validation-accuracy gate
plus the best-checkpoint and early-stop invariants.
"""

import json
import subprocess
import sys
import time


from conftest import run_pipeline_cli, write_session


def test_trainer_smoke(tmp_path):
    start = time.perf_counter()
    data = tmp_path / "data"
    proc = run_pipeline_cli(
        "synth", "--out", data, "--samples-per-class", 20, "--signers", 5,
        "--frames", 40, "--dropout", "0.1", "--seed", 33,
    )
    assert proc.returncode == 0, proc.stderr
    images = tmp_path / "imgs"
    proc = run_pipeline_cli(
        "encode", "--manifest", data / "manifest.json",
        "--strategy", "asl-2nd", "--out", images,
    )
    assert proc.returncode == 0, proc.stderr

    experiment = tmp_path / "experiment.json"
    experiment.write_text(
        json.dumps(
            {
                "manifest_path": str(data / "manifest.json"),
                "strategy": "asl-2nd",
                "impute": {"window": 5},
                "augment": {
                    "rotation_deg": 10.0,
                    "zoom": [0.9, 1.1],
                    "translation": 0.05,
                    "hflip_prob": 0.5,
                    "seed": 7,
                },
            }
        )
    )
    session = {"test": "s4", "val": "s3", "train": ["s0", "s1", "s2"]}
    session_path = write_session(tmp_path / "session.json", session)
    out_dir = tmp_path / "session_out"

    proc = subprocess.run(
        [
            sys.executable, "-m", "signmodels.cli", "run-session",
            "--session", str(session_path),
            "--images", str(images / "index.json"),
            "--out", str(out_dir),
            "--epochs", "30",
            "--seed", "0",
            "--experiment-config", str(experiment),
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr

    curve = json.loads((out_dir / "history.json").read_text())
    history = curve["history"]
    accuracies = [h["val_accuracy"] for h in history]

    # Validation-accuracy gate.
    assert curve["best_val_accuracy"] >= 0.90, accuracies
    assert len(history) <= 30

    # Best-checkpoint invariant: highest accuracy, earliest epoch on ties.
    assert curve["best_val_accuracy"] == max(accuracies)
    assert curve["best_epoch"] == accuracies.index(max(accuracies)) + 1

    # Early-stop invariant: either the loss kept improving for all 30
    # epochs, or the run ended on exactly five stale epochs.
    losses = [h["val_loss"] for h in history]
    if curve["stopped_early"]:
        assert len(history) < 30
        best_so_far = float("inf")
        stale = 0
        for loss in losses:
            if loss < best_so_far:
                best_so_far = loss
                stale = 0
            else:
                stale += 1
        assert stale == 5
    else:
        assert len(history) == 30

    # Holdout predictions for the test signer, in index order.
    preds = json.loads((out_dir / "preds.json").read_text())
    index = json.loads((images / "index.json").read_text())
    test_items = [it for it in index["items"] if it["signer_id"] == session["test"]]
    assert preds["video_ids"] == [it["video_id"] for it in test_items]
    truth = [it["label"] for it in test_items]
    holdout = sum(p == t for p, t in zip(preds["predictions"], truth)) / len(truth)
    assert holdout >= 0.9, holdout

    elapsed = time.perf_counter() - start
    print(
        f"[PASS] trainer smoke: best val acc {curve['best_val_accuracy']:.3f} "
        f"(epoch {curve['best_epoch']}), holdout {holdout:.3f} ({elapsed:.0f}s)"
    )
    assert elapsed < 600.0
