"""Wall-clock benchmarking of pipeline stages and speed-up reports.

A bench run executes the stage chain (read, select, impute, encode, and
optionally a probe inference) on one sequence file R times after a
discarded warm-up, recording per-stage wall-clock seconds. Reports render
as a text table with one row per run plus a Mean (SD) row, and two reports
with matching stages compare into per-stage and end-to-end speed-up
ratios. Absolute times are hardware-bound; only the report structure and
ratio arithmetic are contractual.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .encoding import encode
from .errors import StageFailureError, ValidationError
from .imputation import impute_sequence
from .landmarks import read_sequence
from .selection import apply_selection, load_manifest

DEFAULT_STAGES = ("read", "select", "impute", "encode")


@dataclass(frozen=True)
class BenchReport:
    """Per-stage wall-clock seconds across R runs."""

    stages: tuple[str, ...]
    timings: dict
    valid: bool = True
    error: str | None = None

    def __post_init__(self):
        for stage in self.stages:
            runs = self.timings.get(stage, ())
            if any(t <= 0 for t in runs):
                raise ValidationError(f"stage '{stage}' has non-positive timings")
        lengths = {len(self.timings.get(s, ())) for s in self.stages}
        if self.valid and len(lengths) > 1:
            raise ValidationError(f"stages have unequal run counts: {lengths}")

    @property
    def runs(self) -> int:
        return len(self.timings[self.stages[0]]) if self.stages else 0

    def mean(self, stage: str) -> float:
        return float(np.mean(self.timings[stage]))

    def sd(self, stage: str) -> float:
        return float(np.std(self.timings[stage]))

    def total_mean(self) -> float:
        return float(sum(self.mean(s) for s in self.stages))

    def to_dict(self) -> dict:
        return {
            "stages": list(self.stages),
            "timings": {s: list(self.timings[s]) for s in self.stages},
            "valid": self.valid,
            "error": self.error,
            "mean": {s: self.mean(s) for s in self.stages} if self.valid else {},
            "sd": {s: self.sd(s) for s in self.stages} if self.valid else {},
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_timings(cls, timings: dict) -> "BenchReport":
        return cls(stages=tuple(timings), timings={s: tuple(v) for s, v in timings.items()})

    @classmethod
    def from_json(cls, path: str | Path) -> "BenchReport":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            stages=tuple(data["stages"]),
            timings={s: tuple(v) for s, v in data["timings"].items()},
            valid=bool(data.get("valid", True)),
            error=data.get("error"),
        )

    def render_text(self) -> str:
        """Table with one row per run and a bottom Mean (SD) row."""
        header = ["#"] + list(self.stages)
        rows = [header]
        for r in range(self.runs):
            rows.append([str(r + 1)] + [f"{self.timings[s][r]:.3f}" for s in self.stages])
        rows.append(
            ["Mean (SD)"] + [f"{self.mean(s):.3f} ({self.sd(s):.3f})" for s in self.stages]
        )
        widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
        lines = []
        for i, row in enumerate(rows):
            lines.append("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)).rstrip())
            if i == 0 or i == len(rows) - 2:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SpeedupTable:
    """Ratios of baseline over candidate stage means."""

    per_stage: dict
    end_to_end: float

    def to_dict(self) -> dict:
        return {"per_stage": self.per_stage, "end_to_end": self.end_to_end}

    def render_text(self) -> str:
        lines = [f"{stage}: {ratio:.2f}x" for stage, ratio in self.per_stage.items()]
        lines.append(f"end-to-end: {self.end_to_end:.2f}x")
        return "\n".join(lines) + "\n"


def compare_reports(candidate: BenchReport, baseline: BenchReport) -> SpeedupTable:
    """Speed-up of the candidate over the baseline, per stage and overall.

    The end-to-end ratio divides the sums of stage means, so it includes
    every stage present in the reports (inference included, when timed).
    """
    if candidate.stages != baseline.stages:
        raise ValidationError(
            f"stage mismatch: candidate {candidate.stages} vs baseline {baseline.stages}"
        )
    per_stage = {
        stage: baseline.mean(stage) / candidate.mean(stage) for stage in candidate.stages
    }
    return SpeedupTable(
        per_stage=per_stage,
        end_to_end=baseline.total_mean() / candidate.total_mean(),
    )


def pipeline_stages(
    strategy: str,
    impute_cfg,
    spec,
) -> dict[str, Callable]:
    """Stage callables chained by run_bench; each consumes its predecessor."""
    selection = load_manifest(strategy)

    def stage_read(path):
        return read_sequence(path)

    def stage_select(seq):
        return apply_selection(seq, selection)

    def stage_impute(seq):
        return impute_sequence(seq, impute_cfg)[0] if impute_cfg else seq

    def stage_encode(seq):
        return encode(seq, spec, strategy=selection.name)

    return {
        "read": stage_read,
        "select": stage_select,
        "impute": stage_impute,
        "encode": stage_encode,
    }


def run_bench(
    stages: dict[str, Callable],
    video: str | Path,
    runs: int,
    *,
    warmup: int = 1,
    clock: Callable[[], float] = time.perf_counter,
) -> BenchReport:
    """Time each stage for `runs` recorded runs after `warmup` discarded ones.

    Stages run serially in dict order; a stage failure raises
    :class:`StageFailureError` carrying the partial report marked invalid.
    """
    if runs < 1:
        raise ValidationError("runs must be positive")
    names = tuple(stages)
    timings: dict[str, list[float]] = {name: [] for name in names}

    for r in range(warmup + runs):
        record = r >= warmup
        value: object = Path(video)
        for name in names:
            start = clock()
            try:
                value = stages[name](value)
            except Exception as exc:
                partial = BenchReport(
                    stages=names,
                    timings={s: tuple(v) for s, v in timings.items()},
                    valid=False,
                    error=f"stage '{name}' failed: {exc}",
                )
                raise StageFailureError(partial.error, partial) from exc
            elapsed = clock() - start
            if record:
                timings[name].append(max(elapsed, 1e-9))

    return BenchReport(stages=names, timings={s: tuple(v) for s, v in timings.items()})
