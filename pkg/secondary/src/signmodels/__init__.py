"""signmodels: landmark extraction and classifier training companions.

Produces canonical landmark CSVs from videos (holistic detector adapter)
and trains/evaluates the skeleton-image classifier one LOPO session at a
time, exchanging data with the pipeline exclusively through its file
formats: sequence CSVs in, image index JSON in, predictions JSON out.
"""

__version__ = "0.1.0"

from .extractor import ExtractionError, ExtractorConfig, FrameLandmarks, extract
from .trainer import (
    BestCheckpointTracker,
    EarlyStopTracker,
    SignClassifier,
    TrainConfig,
    TrainerError,
    load_checkpoint,
    predict,
    train,
)

__all__ = [
    "BestCheckpointTracker",
    "EarlyStopTracker",
    "ExtractionError",
    "ExtractorConfig",
    "FrameLandmarks",
    "SignClassifier",
    "TrainConfig",
    "TrainerError",
    "extract",
    "load_checkpoint",
    "predict",
    "train",
]
