from .backbones import MultiLabelNet, build_backbone
from .train import (
    ClassifierError,
    EmptySet,
    NonFiniteLoss,
    PredictionRecord,
    SplitLeakage,
    TrainConfig,
    TrainingRun,
    emit_predictions,
    evaluate,
    load_checkpoint,
    load_predictions,
    predict,
    train,
)

__all__ = [
    "ClassifierError",
    "EmptySet",
    "MultiLabelNet",
    "NonFiniteLoss",
    "PredictionRecord",
    "SplitLeakage",
    "TrainConfig",
    "TrainingRun",
    "build_backbone",
    "emit_predictions",
    "evaluate",
    "load_checkpoint",
    "load_predictions",
    "predict",
    "train",
]
