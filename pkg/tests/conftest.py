import numpy as np
import pytest

from skelsign.landmarks import (
    ALL_LANDMARK_IDS,
    LandmarkId,
    LandmarkSequence,
    Part,
)


def make_sequence(
    coords,
    missing=None,
    ids=None,
    video_id="v0",
    signer_id="s0",
    label="sign",
):
    """Build a sequence from array-likes; missing defaults to all-present."""
    coords = np.asarray(coords, dtype=np.float64)
    if missing is None:
        missing = np.zeros(coords.shape[:2], dtype=bool)
    if ids is None:
        ids = ALL_LANDMARK_IDS[: coords.shape[1]]
    return LandmarkSequence(
        video_id=video_id,
        signer_id=signer_id,
        label=label,
        ids=tuple(ids),
        coords=coords,
        missing=np.asarray(missing, dtype=bool),
    )


def random_sequence(rng, frames=None, ids=None, missing_frac=0.0, full_schema=False):
    """Random valid sequence; missing entries are landmark-frame pairs."""
    if frames is None:
        frames = int(rng.integers(2, 20))
    if ids is None:
        if full_schema:
            ids = ALL_LANDMARK_IDS
        else:
            count = int(rng.integers(3, 40))
            picks = rng.choice(len(ALL_LANDMARK_IDS), size=count, replace=False)
            ids = tuple(ALL_LANDMARK_IDS[i] for i in sorted(picks))
    coords = rng.random((frames, len(ids), 2))
    missing = rng.random((frames, len(ids))) < missing_frac
    coords[missing] = np.nan
    return make_sequence(coords, missing, ids, video_id=f"v{rng.integers(1 << 30)}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def series_sequence(values):
    """Single-landmark sequence whose x and y both follow `values` (NaN = missing)."""
    values = np.asarray(values, dtype=np.float64)
    coords = np.stack([values, values], axis=1)[:, None, :]
    missing = np.isnan(values)[:, None]
    return make_sequence(coords, missing, ids=(LandmarkId(Part.FACE, 0),))
