"""The four comparison criteria: accuracy, confusion matrix, load time, size.

Confusion-matrix orientation is fixed package-wide: rows are predicted
classes, columns are actual classes. Weight size uses binary megabytes
(2**20 bytes). Loading time is the median of repeated artifact loads
after one discarded warm-up load.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import model_zoo
from .errors import (
    BadConfig,
    ClassMismatch,
    EmptyMatrix,
    EmptySplit,
    IndexOutOfRange,
    IoError,
    LengthMismatch,
    ShapeMismatch,
)
from .model_zoo import ClassifierModel, ModelArtifact
from .preprocess import InputTensor, preprocess_batch

MB = float(2 ** 20)


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (K, K) ints; rows = predicted, columns = actual
    class_names: list[str]

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.class_names)
        if self.counts.shape != (k, k):
            raise ShapeMismatch(
                f"counts shape {self.counts.shape} does not match {k} class names"
            )

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def total(self) -> int:
        return int(self.counts.sum())

    def trace(self) -> int:
        return int(np.trace(self.counts))

    def actual_counts(self) -> np.ndarray:
        """Per-class true frequencies (column sums)."""
        return self.counts.sum(axis=0)

    def predicted_counts(self) -> np.ndarray:
        return self.counts.sum(axis=1)


@dataclass
class BenchmarkRecord:
    model_id: str
    weight_size_mb: float
    loading_time_s: float
    accuracy_pct: float
    confusion: ConfusionMatrix

    def __post_init__(self):
        if self.weight_size_mb <= 0:
            raise BadConfig(f"weight_size_mb must be positive, got {self.weight_size_mb}")
        if self.loading_time_s < 0:
            raise BadConfig(f"loading_time_s must be nonnegative, got {self.loading_time_s}")
        expected = 100.0 * self.confusion.trace() / self.confusion.total()
        if abs(self.accuracy_pct - expected) > 1e-9:
            raise BadConfig(
                f"accuracy_pct {self.accuracy_pct} inconsistent with confusion "
                f"matrix ({expected})"
            )

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "weight_size_mb": self.weight_size_mb,
            "loading_time_s": self.loading_time_s,
            "accuracy_pct": self.accuracy_pct,
            "class_names": self.confusion.class_names,
            "confusion_counts": self.confusion.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BenchmarkRecord":
        return cls(
            model_id=doc["model_id"],
            weight_size_mb=doc["weight_size_mb"],
            loading_time_s=doc["loading_time_s"],
            accuracy_pct=doc["accuracy_pct"],
            confusion=ConfusionMatrix(
                counts=np.asarray(doc["confusion_counts"]),
                class_names=list(doc["class_names"]),
            ),
        )


def predict(model: ClassifierModel, tensor: InputTensor):
    """Class probabilities and argmax index for one preprocessed image.

    Ties in the argmax resolve to the lowest class index.
    """
    expected = model.backbone.input.shape
    if tuple(tensor.data.shape) != expected:
        raise ShapeMismatch(
            f"tensor shape {tensor.data.shape} does not match model input {expected}"
        )
    probs = model.predict_proba(tensor.data[np.newaxis])[0]
    return probs, int(np.argmax(probs))


def confusion_matrix(predicted, actual, num_classes: int, class_names=None) -> ConfusionMatrix:
    """Tally counts[p][a] = #{i : predicted_i == p and actual_i == a}."""
    predicted = np.asarray(predicted, dtype=np.int64)
    actual = np.asarray(actual, dtype=np.int64)
    if predicted.shape != actual.shape:
        raise LengthMismatch(
            f"predicted has {predicted.shape[0]} entries, actual has {actual.shape[0]}"
        )
    for name, vec in (("predicted", predicted), ("actual", actual)):
        if vec.size and (vec.min() < 0 or vec.max() >= num_classes):
            raise IndexOutOfRange(f"{name} labels fall outside [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (predicted, actual), 1)
    if class_names is None:
        class_names = [str(i) for i in range(num_classes)]
    return ConfusionMatrix(counts=counts, class_names=list(class_names))


def accuracy(cm: ConfusionMatrix) -> float:
    """Fraction of correctly classified samples: trace over total."""
    total = cm.total()
    if total == 0:
        raise EmptyMatrix("confusion matrix has no entries")
    return cm.trace() / total


def measure_weight_size(artifact: ModelArtifact) -> float:
    """Artifact file size in binary megabytes, to 3 decimals."""
    path = Path(artifact.path)
    if not path.is_file():
        raise IoError(f"artifact file missing: {path}")
    return round(path.stat().st_size / MB, 3)


def measure_load_time(artifact_path, repetitions: int = 5) -> float:
    """Median wall-clock load_model duration after one warm-up load."""
    if repetitions < 3:
        raise BadConfig(f"need at least 3 repetitions, got {repetitions}")
    model_zoo.load_model(artifact_path)  # warm-up, discarded
    durations = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        model_zoo.load_model(artifact_path)
        durations.append(time.perf_counter() - t0)
    return statistics.median(durations)


def evaluate_model(artifact: ModelArtifact, test_split, repetitions: int = 3,
                   batch_size: int = 32) -> BenchmarkRecord:
    """Run all four criteria for one trained artifact on a test split."""
    if not test_split:
        raise EmptySplit("test split is empty")
    class_names = artifact.class_names
    if not class_names:
        raise ClassMismatch(f"artifact {artifact.path} carries no class names")
    for s in test_split:
        if not 0 <= s.class_index < len(class_names):
            raise IndexOutOfRange(
                f"sample {s.path} has class index {s.class_index} for "
                f"{len(class_names)} classes"
            )
        if class_names[s.class_index] != s.class_name:
            raise ClassMismatch(
                f"sample {s.path}: class {s.class_name!r} at index {s.class_index} "
                f"does not match artifact classes {class_names}"
            )

    model = model_zoo.load_model(artifact.path)
    tensors, labels = preprocess_batch(test_split, model.backbone.input)
    predicted = []
    for start in range(0, len(labels), batch_size):
        probs = model.predict_proba(tensors[start:start + batch_size])
        predicted.extend(int(i) for i in probs.argmax(axis=1))

    cm = confusion_matrix(predicted, labels, len(class_names), class_names)
    return BenchmarkRecord(
        model_id=artifact.backbone_id,
        weight_size_mb=measure_weight_size(artifact),
        loading_time_s=round(measure_load_time(artifact.path, repetitions), 3),
        accuracy_pct=100.0 * accuracy(cm),
        confusion=cm,
    )
