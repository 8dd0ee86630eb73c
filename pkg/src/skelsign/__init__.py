"""skelsign: body-landmark sequences to classifier-ready skeleton images.

The pipeline turns per-frame landmark CSVs of signing videos into
quantized 2-D skeleton images: subset selection, spline gap imputation,
geometric augmentation, image encoding, nested leave-one-person-out
evaluation, and per-stage latency benchmarking.
"""

__version__ = "0.1.0"

from .augmentation import AugmentConfig, augment
from .encoding import EncodingSpec, SkeletonImage, encode, encode_dataset
from .errors import (
    CoordinateRangeError,
    OrderingError,
    SchemaError,
    SkelsignError,
    ValidationError,
)
from .evaluation import (
    ExperimentConfig,
    MetricsReport,
    SplitPlan,
    aggregate_sessions,
    compute_metrics,
    make_split_plan,
)
from .imputation import ImputeConfig, ImputeStats, impute_sequence
from .landmarks import (
    ALL_LANDMARK_IDS,
    DatasetManifest,
    LandmarkId,
    LandmarkSequence,
    Part,
    cut_repetitions,
    read_sequence,
    write_sequence,
)
from .selection import SelectionManifest, apply_selection, load_manifest

__all__ = [
    "ALL_LANDMARK_IDS",
    "AugmentConfig",
    "CoordinateRangeError",
    "DatasetManifest",
    "EncodingSpec",
    "ExperimentConfig",
    "ImputeConfig",
    "ImputeStats",
    "LandmarkId",
    "LandmarkSequence",
    "MetricsReport",
    "OrderingError",
    "Part",
    "SchemaError",
    "SelectionManifest",
    "SkeletonImage",
    "SkelsignError",
    "SplitPlan",
    "ValidationError",
    "aggregate_sessions",
    "apply_selection",
    "augment",
    "compute_metrics",
    "cut_repetitions",
    "encode",
    "encode_dataset",
    "impute_sequence",
    "load_manifest",
    "make_split_plan",
    "read_sequence",
    "write_sequence",
]
