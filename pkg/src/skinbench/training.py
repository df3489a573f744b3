"""Head training with Adam, history tracking, and best-epoch checkpointing.

With the backbone frozen (the default), pooled features are extracted once
and the softmax head is trained in plain numpy with an explicit Adam
implementation: runs are bit-reproducible for a fixed seed and the
gradient math is directly checkable against finite differences. With
``freeze=False`` the whole network is fine-tuned through the Keras fit
loop instead.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import model_zoo
from .errors import (
    BadConfig,
    EmptySplit,
    IndexOutOfRange,
    LabelOutOfRange,
    TrainingError,
)
from .model_zoo import ClassifierModel, ModelArtifact, softmax
from .preprocess import preprocess_batch

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-7
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0
    optimizer: str = "adam"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise BadConfig(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise BadConfig(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise BadConfig(f"batch_size must be >= 1, got {self.batch_size}")
        if self.optimizer != "adam":
            raise BadConfig(f"only the adam optimizer is supported, got {self.optimizer!r}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainingHistory:
    records: list[EpochRecord] = field(default_factory=list)

    @property
    def best_epoch(self) -> int:
        """Index of the highest validation accuracy; ties go to the earliest."""
        best, best_acc = 0, -1.0
        for i, rec in enumerate(self.records):
            if rec.val_accuracy > best_acc:
                best, best_acc = i, rec.val_accuracy
        return best

    def to_dict(self) -> dict:
        return {"best_epoch": self.best_epoch, "records": [asdict(r) for r in self.records]}

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainingHistory":
        return cls(records=[EpochRecord(**r) for r in doc["records"]])


# --- loss and gradients ----------------------------------------------------

def cross_entropy(pred, true_index: int) -> float:
    """Negative log-likelihood of the true class under a probability vector.

    The probability is clipped to [1e-12, 1] so a confident miss yields a
    large finite loss instead of infinity.
    """
    pred = np.asarray(pred, dtype=np.float64)
    if abs(pred.sum() - 1.0) > 1e-6:
        raise BadConfig(f"prediction does not sum to 1 (sum {pred.sum()})")
    if not 0 <= true_index < pred.shape[0]:
        raise IndexOutOfRange(f"class index {true_index} outside [0, {pred.shape[0]})")
    p = float(np.clip(pred[true_index], PROB_FLOOR, 1.0))
    return -float(np.log(p))


def head_probabilities(features, weights, bias):
    """Softmax output of the dense head for a (n, d) feature batch."""
    return softmax(np.asarray(features, dtype=np.float64) @ weights + bias)


def head_loss(features, labels, weights, bias) -> float:
    """Mean clipped cross-entropy of the head over a labeled feature batch."""
    probs = head_probabilities(features, weights, bias)
    picked = np.clip(probs[np.arange(len(labels)), labels], PROB_FLOOR, 1.0)
    return float(-np.log(picked).mean())


def head_gradients(features, labels, weights, bias):
    """Analytic gradients of head_loss w.r.t. (weights, bias).

    For softmax + cross-entropy the per-sample logit gradient is
    (probabilities - one_hot); averaging over the batch and chaining
    through the dense layer gives the closed forms below.
    """
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    delta = head_probabilities(features, weights, bias)
    delta[np.arange(n), labels] -= 1.0
    delta /= n
    return features.T @ delta, delta.sum(axis=0)


class Adam:
    """Standard Adam with bias-corrected moment estimates."""

    def __init__(self, learning_rate, beta1=ADAM_BETA1, beta2=ADAM_BETA2, epsilon=ADAM_EPSILON):
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self._m = {}
        self._v = {}

    def step(self, params: dict, grads: dict) -> dict:
        self.t += 1
        out = {}
        for name, p in params.items():
            g = grads[name]
            m = self._m.get(name, np.zeros_like(p))
            v = self._v.get(name, np.zeros_like(p))
            m = self.beta1 * m + (1 - self.beta1) * g
            v = self.beta2 * v + (1 - self.beta2) * g * g
            self._m[name], self._v[name] = m, v
            m_hat = m / (1 - self.beta1 ** self.t)
            v_hat = v / (1 - self.beta2 ** self.t)
            out[name] = p - self.lr * m_hat / (np.sqrt(v_hat) + self.epsilon)
        return out


# --- training loop ---------------------------------------------------------

def _check_splits(model, train_split, val_split):
    if not train_split:
        raise EmptySplit("training split is empty")
    if not val_split:
        raise EmptySplit("validation split is empty")
    for s in list(train_split) + list(val_split):
        if not 0 <= s.class_index < model.num_classes:
            raise LabelOutOfRange(
                f"sample {s.path} has class index {s.class_index}, "
                f"model has {model.num_classes} classes"
            )


def _metrics(features, labels, w, b):
    probs = head_probabilities(features, w, b)
    picked = np.clip(probs[np.arange(len(labels)), labels], PROB_FLOOR, 1.0)
    loss = float(-np.log(picked).mean())
    acc = float((probs.argmax(axis=1) == labels).mean())
    return loss, acc


def train(model: ClassifierModel, train_split, val_split, config: TrainConfig,
          artifact_path, log_fn: Callable[[str], None] | None = None
          ) -> tuple[ModelArtifact, TrainingHistory]:
    """Train the classifier head and persist the best-validation checkpoint.

    Returns the saved artifact (weights from the epoch with the highest
    validation accuracy, earliest on ties) and the full per-epoch history.
    """
    _check_splits(model, train_split, val_split)
    spec = model.backbone.input

    x_train, y_train = preprocess_batch(train_split, spec)
    x_val, y_val = preprocess_batch(val_split, spec)

    if not model.frozen:
        history = _finetune(model, x_train, y_train, x_val, y_val, config, log_fn)
    else:
        raw = model.features(x_train).astype(np.float64)
        mean = raw.mean(axis=0)
        std = raw.std(axis=0)
        model.feature_mean = mean
        model.feature_scale = np.where(std > 0, std, 1.0)
        f_train = (raw - model.feature_mean) / model.feature_scale
        f_val = model.head_features(x_val)
        history = _fit_head(model, f_train, y_train, f_val, y_val, config, log_fn)

    artifact = model_zoo.save_model(model, artifact_path, training_config=config.to_dict())
    return artifact, history


def _fit_head(model, f_train, y_train, f_val, y_val, config, log_fn):
    w, b = model.head_w.copy(), model.head_b.copy()
    adam = Adam(config.learning_rate)
    history = TrainingHistory()
    best_acc, best_w, best_b = -1.0, w, b
    n = len(y_train)

    for epoch in range(config.epochs):
        try:
            rng = np.random.default_rng([config.seed, epoch])
            order = rng.permutation(n)
            loss_sum, hit_sum = 0.0, 0.0
            for start in range(0, n, config.batch_size):
                idx = order[start:start + config.batch_size]
                fb, yb = f_train[idx], y_train[idx]
                probs = head_probabilities(fb, w, b)
                picked = np.clip(probs[np.arange(len(yb)), yb], PROB_FLOOR, 1.0)
                loss_sum += float(-np.log(picked).sum())
                hit_sum += float((probs.argmax(axis=1) == yb).sum())
                gw, gb = head_gradients(fb, yb, w, b)
                updated = adam.step({"w": w, "b": b}, {"w": gw, "b": gb})
                w, b = updated["w"], updated["b"]

            val_loss, val_acc = _metrics(f_val, y_val, w, b)
            rec = EpochRecord(
                epoch=epoch,
                train_loss=loss_sum / n,
                train_accuracy=hit_sum / n,
                val_loss=val_loss,
                val_accuracy=val_acc,
            )
        except FloatingPointError as exc:
            raise TrainingError(str(exc), epoch=epoch) from exc
        history.records.append(rec)
        if log_fn is not None:
            log_fn(_format_record(rec))
        if val_acc > best_acc:
            best_acc, best_w, best_b = val_acc, w.copy(), b.copy()

    model.head_w, model.head_b = best_w, best_b
    return history


def _finetune(model, x_train, y_train, x_val, y_val, config, log_fn):
    """Full fine-tuning through Keras when the backbone is unfrozen."""
    import tensorflow as tf

    tf.keras.utils.set_random_seed(config.seed)
    inputs = tf.keras.Input(shape=model.backbone.input.shape)
    dense = tf.keras.layers.Dense(model.num_classes, activation="softmax", name="head")
    outputs = dense(model.extractor(inputs))
    net = tf.keras.Model(inputs, outputs)
    dense.set_weights([model.head_w.astype(np.float32), model.head_b.astype(np.float32)])
    net.compile(
        optimizer=tf.keras.optimizers.Adam(
            learning_rate=config.learning_rate,
            beta_1=ADAM_BETA1, beta_2=ADAM_BETA2, epsilon=ADAM_EPSILON,
        ),
        loss="sparse_categorical_crossentropy",
        metrics=["accuracy"],
    )
    best = {"acc": -1.0, "weights": None}

    class _BestCheckpoint(tf.keras.callbacks.Callback):
        def on_epoch_end(self, epoch, logs=None):
            acc = float(logs["val_accuracy"])
            if acc > best["acc"]:
                best["acc"] = acc
                best["weights"] = [w.copy() for w in net.get_weights()]

    try:
        fit = net.fit(
            x_train, y_train,
            validation_data=(x_val, y_val),
            epochs=config.epochs,
            batch_size=config.batch_size,
            shuffle=True,
            verbose=0,
            callbacks=[_BestCheckpoint()],
        )
    except Exception as exc:
        raise TrainingError(str(exc)) from exc

    # Restoring through the combined net also rewinds the extractor's
    # variables, which it shares with `model`.
    net.set_weights(best["weights"])

    history = TrainingHistory()
    for epoch in range(config.epochs):
        rec = EpochRecord(
            epoch=epoch,
            train_loss=float(fit.history["loss"][epoch]),
            train_accuracy=float(fit.history["accuracy"][epoch]),
            val_loss=float(fit.history["val_loss"][epoch]),
            val_accuracy=float(fit.history["val_accuracy"][epoch]),
        )
        history.records.append(rec)
        if log_fn is not None:
            log_fn(_format_record(rec))
    kernel, bias = dense.get_weights()
    model.head_w = kernel.astype(np.float64)
    model.head_b = bias.astype(np.float64)
    return history


def _format_record(rec: EpochRecord) -> str:
    return (
        f'{{"epoch": {rec.epoch}, "train_loss": {rec.train_loss:.6f}, '
        f'"train_accuracy": {rec.train_accuracy:.6f}, '
        f'"val_loss": {rec.val_loss:.6f}, "val_accuracy": {rec.val_accuracy:.6f}}}'
    )
