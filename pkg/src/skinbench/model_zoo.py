"""Registry of pretrained backbones and transfer-learning classifier assembly.

The registry covers eleven ImageNet-pretrained convolutional backbones.
Each one is consumed as an opaque feature extractor (global average pooling
over the final convolutional features); classification is done by a single
dense softmax head trained on top.

TensorFlow is imported lazily: registry lookups and artifact metadata
parsing never pay the import cost.
"""

from __future__ import annotations

import io
import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadClassCount,
    CorruptArtifact,
    IoError,
    UnknownBackbone,
    WeightsUnavailable,
)
from .preprocess import SYMMETRIC, UNIT, InputSpec

MAGIC = b"SKBM"
FORMAT_VERSION = 1

WEIGHT_CACHE_ENV = "SKINBENCH_WEIGHTS_DIR"


@dataclass(frozen=True)
class BackboneSpec:
    id: str
    input: InputSpec
    weights_source: str
    feature_dim: int
    builder: str = field(repr=False)  # attribute name under keras.applications

    @property
    def file_id(self) -> str:
        """Identifier safe for filenames."""
        return self.id.replace(" ", "_")


def _spec(name, size, value_range, feature_dim, builder):
    return BackboneSpec(
        id=name,
        input=InputSpec(height=size, width=size, value_range=value_range),
        weights_source="imagenet",
        feature_dim=feature_dim,
        builder=builder,
    )


# Feature dims are the channel counts of each backbone's final conv block;
# build_classifier re-checks them against the instantiated model.
_REGISTRY = [
    _spec("MobileNet", 224, UNIT, 1024, "MobileNet"),
    _spec("VGG16", 224, UNIT, 512, "VGG16"),
    _spec("VGG19", 224, UNIT, 512, "VGG19"),
    _spec("Xception", 299, SYMMETRIC, 2048, "Xception"),
    _spec("ResNet50", 224, UNIT, 2048, "ResNet50"),
    _spec("InceptionV3", 299, SYMMETRIC, 2048, "InceptionV3"),
    _spec("InceptionResNetV2", 299, SYMMETRIC, 1536, "InceptionResNetV2"),
    _spec("DenseNet121", 224, UNIT, 1024, "DenseNet121"),
    _spec("DenseNet169", 224, UNIT, 1664, "DenseNet169"),
    _spec("DenseNet201", 224, UNIT, 1920, "DenseNet201"),
    _spec("NASNet Mobile", 224, UNIT, 1056, "NASNetMobile"),
]

_BY_KEY = {s.id.replace(" ", "").replace("-", "").lower(): s for s in _REGISTRY}


def list_backbones() -> list[BackboneSpec]:
    return list(_REGISTRY)


def get_backbone(backbone_id: str) -> BackboneSpec:
    """Look up a backbone; the id is matched ignoring case, spaces, hyphens."""
    key = str(backbone_id).replace(" ", "").replace("-", "").lower()
    try:
        return _BY_KEY[key]
    except KeyError:
        known = ", ".join(s.id for s in _REGISTRY)
        raise UnknownBackbone(f"unknown backbone {backbone_id!r}; registered: {known}") from None


def _tf():
    cache = os.environ.get(WEIGHT_CACHE_ENV)
    if cache:
        os.environ.setdefault("KERAS_HOME", cache)
    import tensorflow as tf

    return tf


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class ClassifierModel:
    """Frozen (by default) feature extractor plus a dense softmax head.

    The head is kept as plain numpy arrays (``head_w`` of shape
    (feature_dim, num_classes) and ``head_b`` of shape (num_classes,)) so
    training and inference over it are exactly reproducible.

    ``feature_mean`` / ``feature_scale``, when set by training, z-score the
    pooled features before the head. Raw pooled features can sit many
    orders of magnitude away from 1 (extreme with randomly initialized
    deep backbones), which would stall head training at any sane learning
    rate; the standardization is fitted on the training split and travels
    with the saved artifact.
    """

    def __init__(self, backbone: BackboneSpec, extractor, head_w, head_b,
                 frozen: bool = True, class_names=None,
                 feature_mean=None, feature_scale=None):
        self.backbone = backbone
        self.extractor = extractor
        self.head_w = np.asarray(head_w, dtype=np.float64)
        self.head_b = np.asarray(head_b, dtype=np.float64)
        self.frozen = frozen
        self.class_names = list(class_names) if class_names is not None else None
        self.feature_mean = None if feature_mean is None else np.asarray(feature_mean, dtype=np.float64)
        self.feature_scale = None if feature_scale is None else np.asarray(feature_scale, dtype=np.float64)
        if self.head_w.shape != (backbone.feature_dim, self.head_b.shape[0]):
            raise ValueError(
                f"head shape {self.head_w.shape} inconsistent with "
                f"feature_dim {backbone.feature_dim} / bias {self.head_b.shape}"
            )

    @property
    def num_classes(self) -> int:
        return int(self.head_b.shape[0])

    def features(self, batch: np.ndarray) -> np.ndarray:
        """Pooled backbone features for a preprocessed (n, h, w, 3) batch."""
        if batch.shape[0] == 0:
            return np.zeros((0, self.backbone.feature_dim), dtype=np.float32)
        out = self.extractor.predict(batch, verbose=0)
        return np.asarray(out)

    def head_features(self, batch: np.ndarray) -> np.ndarray:
        """Pooled features after the stored standardization, float64."""
        f = self.features(batch).astype(np.float64)
        if self.feature_mean is not None:
            f = (f - self.feature_mean) / self.feature_scale
        return f

    def predict_proba(self, batch: np.ndarray) -> np.ndarray:
        """(n, num_classes) class probabilities for a preprocessed batch."""
        return softmax(self.head_features(batch) @ self.head_w + self.head_b)

    def backbone_checksums(self) -> list[float]:
        return [float(np.sum(np.abs(w), dtype=np.float64)) for w in self.extractor.get_weights()]

    def head_checksum(self) -> float:
        return float(np.sum(np.abs(self.head_w)) + np.sum(np.abs(self.head_b)))


def _build_extractor(spec: BackboneSpec, weights: str, backbone_seed: int):
    tf = _tf()
    builder = getattr(tf.keras.applications, spec.builder)
    kwargs = dict(
        include_top=False,
        pooling="avg",
        input_shape=spec.input.shape,
    )
    if weights == "random":
        tf.keras.utils.set_random_seed(backbone_seed)
        extractor = builder(weights=None, **kwargs)
        _he_reinit(extractor, backbone_seed)
    elif weights == "uninitialized":
        # architecture only; the caller overwrites every weight
        extractor = builder(weights=None, **kwargs)
    elif weights == "pretrained":
        try:
            extractor = builder(weights="imagenet", **kwargs)
        except Exception as exc:  # keras raises plain Exception on download failure
            raise WeightsUnavailable(
                f"pretrained weights for {spec.id} unavailable "
                f"(no cache under ${WEIGHT_CACHE_ENV or 'KERAS_HOME'} and no network): {exc}"
            ) from exc
    else:
        raise ValueError(f"weights must be 'pretrained' or 'random', got {weights!r}")

    got = int(extractor.output_shape[-1])
    if got != spec.feature_dim:
        raise RuntimeError(
            f"registry feature_dim {spec.feature_dim} for {spec.id} "
            f"disagrees with instantiated extractor ({got})"
        )
    return extractor


def _he_reinit(extractor, seed: int) -> None:
    """Overwrite every kernel with seeded He-scaled normal draws.

    Keras' default glorot init lets activations decay through deep ReLU
    stacks; with untrained weights the pooled features of *any* input
    collapse to one point, which makes random-weights mode useless. He
    scaling keeps distinct inputs distinct. Drawing from a numpy generator
    also makes the init reproducible across processes and TF versions.
    """
    rng = np.random.default_rng(seed)
    new_weights = []
    for var, w in zip(extractor.weights, extractor.get_weights()):
        name = getattr(var, "path", None) or var.name
        if w.ndim >= 2:
            if "depthwise" in name:
                fan_in = w.shape[0] * w.shape[1]
            elif w.ndim == 4:
                fan_in = w.shape[0] * w.shape[1] * w.shape[2]
            else:
                fan_in = w.shape[0]
            w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=w.shape).astype(w.dtype)
        new_weights.append(w)
    extractor.set_weights(new_weights)


def build_classifier(backbone_id: str, num_classes: int, freeze: bool = True,
                     weights: str = "pretrained", seed: int = 0,
                     backbone_seed: int = 0, class_names=None) -> ClassifierModel:
    """Assemble a transfer-learning classifier.

    ``weights='random'`` replaces the pretrained backbone weights with a
    seeded random initialization so the whole pipeline runs offline. The
    head seed is independent of the backbone seed: two builds with
    different ``seed`` share identical backbone weights.
    """
    if num_classes < 2:
        raise BadClassCount(f"need at least 2 classes, got {num_classes}")
    spec = get_backbone(backbone_id)
    extractor = _build_extractor(spec, weights, backbone_seed)
    extractor.trainable = not freeze

    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(spec.feature_dim)
    head_w = rng.normal(0.0, scale, size=(spec.feature_dim, num_classes))
    head_b = np.zeros(num_classes)
    return ClassifierModel(spec, extractor, head_w, head_b, frozen=freeze,
                           class_names=class_names)


@dataclass(frozen=True)
class ModelArtifact:
    path: Path
    backbone_id: str
    class_names: list[str]
    training_config: dict
    byte_size: int


def save_model(model: ClassifierModel, path, training_config: dict | None = None) -> ModelArtifact:
    """Serialize a classifier into a single-file container.

    Layout: 4-byte magic, 1-byte format version, 8-byte little-endian
    metadata length, JSON metadata, then an uncompressed npz archive with
    every backbone weight array plus the head.
    """
    path = Path(path)
    if model.class_names is not None and len(model.class_names) != model.num_classes:
        raise ValueError("class_names length must equal the model's output dimension")

    meta = {
        "backbone_id": model.backbone.id,
        "class_names": model.class_names,
        "num_classes": model.num_classes,
        "frozen": model.frozen,
        "training_config": training_config or {},
    }
    meta_bytes = json.dumps(meta, sort_keys=True).encode()

    arrays = {f"bb_{i:04d}": w for i, w in enumerate(model.extractor.get_weights())}
    arrays["head_w"] = model.head_w
    arrays["head_b"] = model.head_b
    if model.feature_mean is not None:
        arrays["feat_mean"] = model.feature_mean
        arrays["feat_scale"] = model.feature_scale
    blob = io.BytesIO()
    np.savez(blob, **arrays)

    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(bytes([FORMAT_VERSION]))
            fh.write(struct.pack("<Q", len(meta_bytes)))
            fh.write(meta_bytes)
            fh.write(blob.getvalue())
    except OSError as exc:
        raise IoError(f"cannot write model artifact to {path}: {exc}") from exc

    return ModelArtifact(
        path=path,
        backbone_id=model.backbone.id,
        class_names=list(model.class_names) if model.class_names else [],
        training_config=dict(training_config or {}),
        byte_size=path.stat().st_size,
    )


def _read_container(path):
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read model artifact {path}: {exc}") from exc

    header_len = len(MAGIC) + 1 + 8
    if len(raw) < header_len or raw[:4] != MAGIC:
        raise CorruptArtifact(f"{path} is not a model artifact (bad magic)")
    version = raw[4]
    if version != FORMAT_VERSION:
        raise CorruptArtifact(f"{path}: unsupported artifact version {version}")
    (meta_len,) = struct.unpack("<Q", raw[5:13])
    if header_len + meta_len > len(raw):
        raise CorruptArtifact(f"{path}: truncated metadata block")
    try:
        meta = json.loads(raw[header_len:header_len + meta_len])
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptArtifact(f"{path}: unreadable metadata: {exc}") from exc
    return meta, raw[header_len + meta_len:]


def read_artifact_meta(path) -> ModelArtifact:
    """Metadata of a saved artifact without instantiating the backbone."""
    meta, _ = _read_container(path)
    return ModelArtifact(
        path=Path(path),
        backbone_id=meta["backbone_id"],
        class_names=meta.get("class_names") or [],
        training_config=meta.get("training_config", {}),
        byte_size=Path(path).stat().st_size,
    )


def load_model(path) -> ClassifierModel:
    """Rebuild a classifier from a saved artifact (no weight download)."""
    meta, weight_blob = _read_container(path)
    try:
        with np.load(io.BytesIO(weight_blob), allow_pickle=False) as npz:
            arrays = {name: npz[name] for name in npz.files}
    except Exception as exc:
        raise CorruptArtifact(f"{path}: unreadable weight archive: {exc}") from exc

    if "head_w" not in arrays or "head_b" not in arrays:
        raise CorruptArtifact(f"{path}: weight archive is missing the head")

    spec = get_backbone(meta["backbone_id"])
    extractor = _build_extractor(spec, weights="uninitialized", backbone_seed=0)
    bb = [arrays[name] for name in sorted(a for a in arrays if a.startswith("bb_"))]
    try:
        extractor.set_weights(bb)
    except ValueError as exc:
        raise CorruptArtifact(f"{path}: backbone weights do not fit {spec.id}: {exc}") from exc

    frozen = bool(meta.get("frozen", True))
    extractor.trainable = not frozen
    return ClassifierModel(
        spec,
        extractor,
        arrays["head_w"],
        arrays["head_b"],
        frozen=frozen,
        class_names=meta.get("class_names"),
        feature_mean=arrays.get("feat_mean"),
        feature_scale=arrays.get("feat_scale"),
    )
