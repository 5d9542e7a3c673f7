from .crops import CropResult, sample_reference_crops
from .extractors import build_extractor, collect_grouped_images, extract_features, features_by_condition
from .generate import AdapterFailure, NoiseStubAdapter, build_adapter, distribute_counts, run_generation
from .prompts import PromptSpec, condition_key, derive_prompts
from .runner import ConfigError, Pipeline, StageFailure, load_config, run_pipeline
from .variants import (
    DatasetVariant,
    MissingPrediction,
    PipelineError,
    VARIANT_NAMES,
    apply_pair_filter,
    file_sha256,
    filter_dataset,
)

__all__ = [
    "AdapterFailure",
    "ConfigError",
    "CropResult",
    "DatasetVariant",
    "MissingPrediction",
    "NoiseStubAdapter",
    "Pipeline",
    "PipelineError",
    "PromptSpec",
    "StageFailure",
    "VARIANT_NAMES",
    "apply_pair_filter",
    "build_adapter",
    "build_extractor",
    "collect_grouped_images",
    "condition_key",
    "derive_prompts",
    "distribute_counts",
    "extract_features",
    "features_by_condition",
    "file_sha256",
    "filter_dataset",
    "load_config",
    "run_generation",
    "run_pipeline",
    "sample_reference_crops",
]
