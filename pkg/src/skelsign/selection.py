"""Landmark subset strategies and their application to sequences.

Five strategies are bundled as versioned JSON manifests under
``skelsign/manifests/``: the full 543-point set (`all`), the 68-point set
of lips + upper-limb joints + hands (`laines`), the 75-point pose + hands
set (`arcanjo`), the 118-point face + hands set (`asl-1st`), and the
80-point lips + pose + hands set (`asl-2nd`). Keeping the index lists in
data files lets them be corrected against their source publications
without code changes; custom manifests load from a path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import ValidationError
from .landmarks import LandmarkId, LandmarkSequence, Part

BUILTIN_STRATEGIES = ("all", "laines", "arcanjo", "asl-1st", "asl-2nd")
_EXPECTED_COUNTS = {
    "all": 543,
    "laines": 68,
    "arcanjo": 75,
    "asl-1st": 118,
    "asl-2nd": 80,
}


@dataclass(frozen=True)
class SelectionManifest:
    """Named, ordered list of landmark ids; order defines encoder row order."""

    name: str
    ids: tuple[LandmarkId, ...]
    expected_count: int

    def __post_init__(self):
        if len(set(self.ids)) != len(self.ids):
            raise ValidationError(f"manifest '{self.name}' has duplicate ids")
        if len(self.ids) != self.expected_count:
            raise ValidationError(
                f"manifest '{self.name}' has {len(self.ids)} ids, "
                f"expected {self.expected_count}"
            )

    def count_for(self, part: Part) -> int:
        return sum(1 for lid in self.ids if lid.part is part)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "ids": [lid.to_dict() for lid in self.ids],
            "expected_count": self.expected_count,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8"
        )

    @classmethod
    def from_dict(cls, data: dict) -> "SelectionManifest":
        return cls(
            name=str(data["name"]),
            ids=tuple(LandmarkId.from_dict(d) for d in data["ids"]),
            expected_count=int(data["expected_count"]),
        )


def _normalize_name(name: str) -> str:
    return name.strip().lower().replace("_", "-")


def load_manifest(name_or_path: str | Path) -> SelectionManifest:
    """Load a built-in strategy by name or a manifest JSON by path."""
    name = _normalize_name(str(name_or_path))
    if name in BUILTIN_STRATEGIES:
        ref = resources.files("skelsign").joinpath(f"manifests/{name}.json")
        data = json.loads(ref.read_text(encoding="utf-8"))
        manifest = SelectionManifest.from_dict(data)
        if manifest.expected_count != _EXPECTED_COUNTS[name]:
            raise ValidationError(
                f"built-in '{name}' declares {manifest.expected_count} ids, "
                f"expected {_EXPECTED_COUNTS[name]}"
            )
        return manifest
    path = Path(name_or_path)
    if not path.exists():
        raise ValidationError(
            f"'{name_or_path}' is neither a built-in strategy "
            f"{BUILTIN_STRATEGIES} nor an existing manifest file"
        )
    data = json.loads(path.read_text(encoding="utf-8"))
    return SelectionManifest.from_dict(data)


def apply_selection(seq: LandmarkSequence, manifest: SelectionManifest) -> LandmarkSequence:
    """Project a sequence onto the manifest's landmarks, in manifest order.

    Idempotent: applying a manifest to its own output is the identity.
    """
    try:
        positions = [seq.position_of(lid) for lid in manifest.ids]
    except KeyError as exc:
        raise ValidationError(
            f"manifest '{manifest.name}' references landmark "
            f"{exc.args[0].column_base} absent from the sequence"
        ) from None
    return seq.replace(
        ids=manifest.ids,
        coords=seq.coords[:, positions],
        missing=seq.missing[:, positions],
    )
