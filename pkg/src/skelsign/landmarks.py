"""Landmark schema and lossless CSV interchange for signing-video sequences.

The holistic detector emits 543 body landmarks per frame: 468 face points,
33 pose points, and 21 points per hand. A sequence is stored on disk as a
CSV with one row per frame and two columns (x, y) per landmark, normalized
to [0, 1]. Undetected landmarks are empty cells. All downstream stages
(selection, imputation, encoding) consume the types defined here.

Canonical column order is face 0-467, pose 0-32, left_hand 0-20,
right_hand 0-20, each landmark contributing `<part>_<idx>_x,<part>_<idx>_y`.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    CoordinateRangeError,
    OrderingError,
    SchemaError,
    ValidationError,
)


class Part(str, Enum):
    """Body part a landmark belongs to."""

    FACE = "face"
    POSE = "pose"
    LEFT_HAND = "left_hand"
    RIGHT_HAND = "right_hand"


PART_ORDER: tuple[Part, ...] = (Part.FACE, Part.POSE, Part.LEFT_HAND, Part.RIGHT_HAND)
PART_SIZES: dict[Part, int] = {
    Part.FACE: 468,
    Part.POSE: 33,
    Part.LEFT_HAND: 21,
    Part.RIGHT_HAND: 21,
}
TOTAL_LANDMARKS = sum(PART_SIZES.values())  # 543

# Coordinates this far outside [0, 1] are clamped on ingestion; beyond it,
# ingestion fails. Detector jitter at image borders stays well inside this.
CLAMP_TOLERANCE = 0.5
COORD_DECIMALS = 6


@dataclass(frozen=True)
class LandmarkId:
    """Identifier of one landmark within the 543-point schema."""

    part: Part
    index: int

    def __post_init__(self):
        limit = PART_SIZES[self.part]
        if not 0 <= self.index < limit:
            raise ValidationError(
                f"{self.part.value} index {self.index} out of range [0, {limit})"
            )

    @property
    def column_base(self) -> str:
        return f"{self.part.value}_{self.index}"

    def to_dict(self) -> dict:
        return {"part": self.part.value, "index": self.index}

    @classmethod
    def from_dict(cls, data: dict) -> "LandmarkId":
        return cls(Part(data["part"]), int(data["index"]))


def _build_all_ids() -> tuple[LandmarkId, ...]:
    ids = []
    for part in PART_ORDER:
        ids.extend(LandmarkId(part, i) for i in range(PART_SIZES[part]))
    return tuple(ids)


ALL_LANDMARK_IDS: tuple[LandmarkId, ...] = _build_all_ids()
CANONICAL_POSITION: dict[LandmarkId, int] = {
    lid: pos for pos, lid in enumerate(ALL_LANDMARK_IDS)
}


def canonical_header(ids: Sequence[LandmarkId] | None = None) -> list[str]:
    """CSV header for the given landmark set (full schema by default)."""
    ids = ALL_LANDMARK_IDS if ids is None else ids
    cols = ["frame"]
    for lid in ids:
        cols.append(f"{lid.column_base}_x")
        cols.append(f"{lid.column_base}_y")
    return cols


@dataclass(frozen=True)
class LandmarkSequence:
    """Per-video time series of 2-D landmark coordinates with a missing mask.

    `coords` has shape (T, L, 2) with NaN at missing entries; `missing` has
    shape (T, L). A landmark is either fully present (both x and y) or fully
    missing in a frame. Instances are immutable; the arrays are copied on
    construction and marked read-only.
    """

    video_id: str
    signer_id: str
    label: str
    ids: tuple[LandmarkId, ...]
    coords: np.ndarray
    missing: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=np.float64)
        missing = np.array(self.missing, dtype=bool)
        if coords.ndim != 3 or coords.shape[2] != 2:
            raise ValidationError(f"coords must have shape (T, L, 2), got {coords.shape}")
        t, l = coords.shape[:2]
        if missing.shape != (t, l):
            raise ValidationError(
                f"missing mask shape {missing.shape} does not match coords {(t, l)}"
            )
        if len(self.ids) != l:
            raise ValidationError(f"{len(self.ids)} ids for {l} landmark columns")
        if len(set(self.ids)) != l:
            raise ValidationError("duplicate landmark ids")
        coords[missing] = np.nan
        present = coords[~missing]
        if present.size and (
            np.isnan(present).any() or present.min() < 0.0 or present.max() > 1.0
        ):
            raise ValidationError("present coordinates must lie in [0, 1]")
        coords.flags.writeable = False
        missing.flags.writeable = False
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "missing", missing)
        object.__setattr__(self, "ids", tuple(self.ids))

    @property
    def frame_count(self) -> int:
        return self.coords.shape[0]

    @property
    def landmark_count(self) -> int:
        return self.coords.shape[1]

    def replace(self, **changes) -> "LandmarkSequence":
        return dataclasses.replace(self, **changes)

    def position_of(self, lid: LandmarkId) -> int:
        try:
            return self._positions[lid]
        except AttributeError:
            object.__setattr__(
                self, "_positions", {l: i for i, l in enumerate(self.ids)}
            )
            return self._positions[lid]

    def allclose(self, other: "LandmarkSequence", atol: float = 5e-7) -> bool:
        """True when masks match exactly and present coordinates match within atol."""
        if self.ids != other.ids or self.frame_count != other.frame_count:
            return False
        if not np.array_equal(self.missing, other.missing):
            return False
        mine = self.coords[~self.missing]
        theirs = other.coords[~other.missing]
        return bool(np.allclose(mine, theirs, atol=atol, rtol=0.0))


def _clamp_unit(value: float, clamp: bool, where: str) -> float:
    if math.isnan(value):
        return value
    if value < -CLAMP_TOLERANCE or value > 1.0 + CLAMP_TOLERANCE:
        raise CoordinateRangeError(
            f"coordinate {value} at {where} is outside [-{CLAMP_TOLERANCE}, "
            f"{1.0 + CLAMP_TOLERANCE}]"
        )
    if not clamp and not 0.0 <= value <= 1.0:
        raise CoordinateRangeError(
            f"coordinate {value} at {where} is outside [0, 1] and clamping is off"
        )
    return min(max(value, 0.0), 1.0)


def _parse_header(columns: Sequence[str]) -> tuple[LandmarkId, ...]:
    if not columns or columns[0] != "frame":
        raise SchemaError("first column must be 'frame'")
    coord_cols = columns[1:]
    if len(coord_cols) % 2 != 0:
        raise SchemaError("coordinate columns must come in x/y pairs")
    # Full-schema files must match the canonical layout column for column.
    if len(coord_cols) == 2 * TOTAL_LANDMARKS:
        expected = canonical_header()
        for got, want in zip(columns, expected):
            if got != want:
                raise SchemaError(f"header column '{got}' should be '{want}'")
        return ALL_LANDMARK_IDS

    part_names = {p.value: p for p in Part}
    ids: list[LandmarkId] = []
    for i in range(0, len(coord_cols), 2):
        x_col, y_col = coord_cols[i], coord_cols[i + 1]
        base, _, axis = x_col.rpartition("_")
        if axis != "x":
            raise SchemaError(f"header column '{x_col}' should be an _x column")
        if y_col != f"{base}_y":
            raise SchemaError(f"header column '{y_col}' should be '{base}_y'")
        part_name, _, idx_str = base.rpartition("_")
        if part_name not in part_names or not idx_str.isdigit():
            raise SchemaError(f"header column '{x_col}' is not a known landmark")
        try:
            ids.append(LandmarkId(part_names[part_name], int(idx_str)))
        except ValidationError as exc:
            raise SchemaError(f"header column '{x_col}': {exc}") from exc
    if len(set(ids)) != len(ids):
        raise SchemaError("duplicate landmark columns in header")
    return tuple(ids)


def read_sequence(
    path: str | Path,
    *,
    video_id: str | None = None,
    signer_id: str = "",
    label: str = "",
    clamp: bool = True,
) -> LandmarkSequence:
    """Read a sequence CSV into a :class:`LandmarkSequence`.

    Empty and NaN cells become missing values. A landmark with only one of
    its two cells present is treated as fully missing. Coordinates slightly
    outside [0, 1] are clamped (within ``CLAMP_TOLERANCE``); values beyond
    that raise :class:`CoordinateRangeError`.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        ids = _parse_header(header)
        n_cols = len(header)
        rows: list[list[str]] = []
        for row in reader:
            if not row:
                continue
            if len(row) != n_cols:
                raise SchemaError(
                    f"{path}: row {len(rows)} has {len(row)} cells, expected {n_cols}"
                )
            rows.append(row)

    t, l = len(rows), len(ids)
    coords = np.full((t, l, 2), np.nan)
    missing = np.ones((t, l), dtype=bool)
    for r, row in enumerate(rows):
        try:
            frame = int(row[0])
        except ValueError:
            raise OrderingError(f"{path}: frame cell '{row[0]}' is not an integer") from None
        if frame != r:
            raise OrderingError(f"{path}: frame column must be 0..T-1, got {frame} at row {r}")
        for j in range(l):
            x_cell, y_cell = row[1 + 2 * j].strip(), row[2 + 2 * j].strip()
            pair = []
            for cell, axis in ((x_cell, "x"), (y_cell, "y")):
                if cell == "" or cell.lower() == "nan":
                    pair.append(np.nan)
                else:
                    try:
                        value = float(cell)
                    except ValueError:
                        raise SchemaError(
                            f"{path}: cell '{cell}' in column "
                            f"{ids[j].column_base}_{axis} is not numeric"
                        ) from None
                    pair.append(
                        _clamp_unit(value, clamp, f"frame {r}, {ids[j].column_base}_{axis}")
                    )
            if not any(math.isnan(v) for v in pair):
                coords[r, j] = pair
                missing[r, j] = False

    return LandmarkSequence(
        video_id=video_id if video_id is not None else path.stem,
        signer_id=signer_id,
        label=label,
        ids=ids,
        coords=coords,
        missing=missing,
    )


def write_sequence(seq: LandmarkSequence, path: str | Path) -> None:
    """Write a sequence as canonical CSV: fixed column order, 6-decimal
    fixed-point, empty cells for missing values, LF line endings."""
    path = Path(path)
    with path.open("w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(canonical_header(seq.ids))
        fmt = f"%.{COORD_DECIMALS}f"
        for r in range(seq.frame_count):
            row: list[str] = [str(r)]
            for j in range(seq.landmark_count):
                if seq.missing[r, j]:
                    row.extend(("", ""))
                else:
                    row.append(fmt % seq.coords[r, j, 0])
                    row.append(fmt % seq.coords[r, j, 1])
            writer.writerow(row)


def cut_repetitions(
    seq: LandmarkSequence, cuts: Sequence[tuple[int, int]]
) -> list[LandmarkSequence]:
    """Split a multi-repetition sequence at the given (start, end) frame cuts.

    Cuts must satisfy 0 <= start < end <= T and must not overlap. Each output
    is re-based to frame 0 and its video_id is suffixed with the repetition
    index (position in `cuts`).
    """
    t = seq.frame_count
    for start, end in cuts:
        if not 0 <= start < end <= t:
            raise ValidationError(f"cut ({start}, {end}) out of range for T={t}")
    for (_, prev_end), (next_start, _) in zip(
        sorted(cuts), sorted(cuts)[1:]
    ):
        if next_start < prev_end:
            raise ValidationError("cuts overlap")

    pieces = []
    for i, (start, end) in enumerate(cuts):
        pieces.append(
            seq.replace(
                video_id=f"{seq.video_id}_rep{i}",
                coords=seq.coords[start:end],
                missing=seq.missing[start:end],
            )
        )
    return pieces


@dataclass(frozen=True)
class ManifestEntry:
    video_id: str
    signer_id: str
    label: str
    path: Path


@dataclass(frozen=True)
class CutPoint:
    video_id: str
    start_frame: int
    end_frame: int
    repetition_index: int


@dataclass(frozen=True)
class DatasetManifest:
    """Catalog of sequence files plus optional repetition cut points."""

    entries: tuple[ManifestEntry, ...]
    cut_points: tuple[CutPoint, ...] = ()

    def __post_init__(self):
        seen = set()
        for entry in self.entries:
            if entry.video_id in seen:
                raise ValidationError(f"duplicate video_id '{entry.video_id}'")
            seen.add(entry.video_id)
        for cut in self.cut_points:
            if cut.video_id not in seen:
                raise ValidationError(f"cut_points reference unknown video '{cut.video_id}'")
            if not 0 <= cut.start_frame < cut.end_frame:
                raise ValidationError(
                    f"cut ({cut.start_frame}, {cut.end_frame}) for '{cut.video_id}' is invalid"
                )

    @property
    def signers(self) -> tuple[str, ...]:
        return tuple(sorted({e.signer_id for e in self.entries}))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(sorted({e.label for e in self.entries}))

    def cuts_for(self, video_id: str) -> list[CutPoint]:
        cuts = [c for c in self.cut_points if c.video_id == video_id]
        cuts.sort(key=lambda c: c.repetition_index)
        return cuts

    @classmethod
    def from_json(cls, path: str | Path, *, check_files: bool = True) -> "DatasetManifest":
        path = Path(path)
        with path.open(encoding="utf-8") as fh:
            data = json.load(fh)
        entries = []
        for item in data.get("entries", []):
            seq_path = Path(item["path"])
            if not seq_path.is_absolute():
                seq_path = path.parent / seq_path
            if check_files and not seq_path.exists():
                raise ValidationError(f"sequence file not found: {seq_path}")
            entries.append(
                ManifestEntry(
                    video_id=str(item["video_id"]),
                    signer_id=str(item["signer_id"]),
                    label=str(item["label"]),
                    path=seq_path,
                )
            )
        cut_points = tuple(
            CutPoint(
                video_id=str(c["video_id"]),
                start_frame=int(c["start_frame"]),
                end_frame=int(c["end_frame"]),
                repetition_index=int(c["repetition_index"]),
            )
            for c in data.get("cut_points", [])
        )
        return cls(entries=tuple(entries), cut_points=cut_points)

    def to_json(self, path: str | Path) -> None:
        path = Path(path)
        base = path.parent.resolve()

        def portable(seq_path: Path) -> str:
            # Stored relative to the manifest when possible, so the
            # manifest directory can be moved or mounted elsewhere.
            resolved = seq_path.resolve()
            try:
                return str(resolved.relative_to(base))
            except ValueError:
                return str(resolved)

        data = {
            "entries": [
                {
                    "video_id": e.video_id,
                    "signer_id": e.signer_id,
                    "label": e.label,
                    "path": portable(e.path),
                }
                for e in self.entries
            ],
            "cut_points": [
                {
                    "video_id": c.video_id,
                    "start_frame": c.start_frame,
                    "end_frame": c.end_frame,
                    "repetition_index": c.repetition_index,
                }
                for c in self.cut_points
            ],
        }
        path.write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def iter_dataset_sequences(
    manifest: DatasetManifest, video_ids: Iterable[str] | None = None
) -> Iterator[LandmarkSequence]:
    """Yield one sequence per (video, repetition), applying any cut points.

    Cut ranges are validated against the actual frame count at load time.
    """
    wanted = set(video_ids) if video_ids is not None else None
    for entry in manifest.entries:
        if wanted is not None and entry.video_id not in wanted:
            continue
        seq = read_sequence(
            entry.path,
            video_id=entry.video_id,
            signer_id=entry.signer_id,
            label=entry.label,
        )
        cuts = manifest.cuts_for(entry.video_id)
        if not cuts:
            yield seq
            continue
        ranges = [(c.start_frame, c.end_frame) for c in cuts]
        for cut, piece in zip(cuts, cut_repetitions(seq, ranges)):
            yield piece.replace(video_id=f"{entry.video_id}_rep{cut.repetition_index}")
