"""Transfer-learning benchmark suite for directory-per-class image datasets.

Pipeline: scan a class-per-directory dataset, split it, train a softmax
head on each registered pretrained backbone with Adam, then compare the
models on accuracy, confusion matrix, artifact loading time, and weight
size, emitting a comparison report with per-model confusion heatmaps.
"""

from .dataset import (
    DatasetManifest,
    ImageSample,
    SplitManifest,
    load_image,
    scan_dataset,
    split_dataset,
)
from .evaluation import (
    BenchmarkRecord,
    ConfusionMatrix,
    accuracy,
    confusion_matrix,
    evaluate_model,
    measure_load_time,
    measure_weight_size,
    predict,
)
from .model_zoo import (
    BackboneSpec,
    ClassifierModel,
    ModelArtifact,
    build_classifier,
    list_backbones,
    load_model,
    save_model,
)
from .preprocess import (
    InputSpec,
    InputTensor,
    preprocess_batch,
    preprocess_image,
    required_input,
)
from .report import ComparisonTable, build_table, emit_report
from .training import TrainConfig, TrainingHistory, cross_entropy, train

__version__ = "0.1.0"

__all__ = [
    "BackboneSpec",
    "BenchmarkRecord",
    "ClassifierModel",
    "ComparisonTable",
    "ConfusionMatrix",
    "DatasetManifest",
    "ImageSample",
    "InputSpec",
    "InputTensor",
    "ModelArtifact",
    "SplitManifest",
    "TrainConfig",
    "TrainingHistory",
    "accuracy",
    "build_classifier",
    "build_table",
    "confusion_matrix",
    "cross_entropy",
    "emit_report",
    "evaluate_model",
    "list_backbones",
    "load_image",
    "load_model",
    "measure_load_time",
    "measure_weight_size",
    "predict",
    "preprocess_batch",
    "preprocess_image",
    "required_input",
    "save_model",
    "scan_dataset",
    "split_dataset",
    "train",
]
