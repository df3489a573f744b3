"""Image-to-tensor preprocessing matched to each backbone's input contract.

Every backbone declares a fixed input geometry and a normalization range.
Preprocessing is a plain bilinear stretch to that geometry (no aspect-ratio
preservation, no cropping, no mean/std normalization) followed by mapping
8-bit values into the declared range:

    unit:       v / 255            -> [0, 1]
    symmetric:  v / 127.5 - 1      -> [-1, 1]
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import DecodeError, EmptyImage

UNIT = "unit"
SYMMETRIC = "symmetric"


@dataclass(frozen=True)
class InputSpec:
    height: int
    width: int
    channels: int = 3
    value_range: str = UNIT

    def __post_init__(self):
        if self.channels != 3:
            raise ValueError("input specs are RGB-only (channels = 3)")
        if self.value_range not in (UNIT, SYMMETRIC):
            raise ValueError(f"unknown value_range {self.value_range!r}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.height, self.width, self.channels)

    @property
    def bounds(self) -> tuple[float, float]:
        return (0.0, 1.0) if self.value_range == UNIT else (-1.0, 1.0)


@dataclass(frozen=True)
class InputTensor:
    data: np.ndarray
    spec: InputSpec


def required_input(backbone_id: str) -> InputSpec:
    """Input geometry and normalization for a registered backbone."""
    from . import model_zoo

    return model_zoo.get_backbone(backbone_id).input


def normalize(values: np.ndarray, value_range: str) -> np.ndarray:
    """Map 8-bit pixel values into the given range as float32."""
    v = values.astype(np.float32)
    if value_range == UNIT:
        return v / 255.0
    return v / 127.5 - 1.0


def preprocess_image(image: np.ndarray, spec: InputSpec) -> InputTensor:
    """Resize an (h, w, 3) uint8 buffer to the spec geometry and normalize."""
    image = np.asarray(image)
    if image.size == 0:
        raise EmptyImage("cannot preprocess an image with zero pixels")
    if image.ndim != 3 or image.shape[2] != 3:
        raise EmptyImage(f"expected an (h, w, 3) buffer, got shape {image.shape}")

    if image.shape[:2] != (spec.height, spec.width):
        pil = Image.fromarray(image.astype(np.uint8))
        pil = pil.resize((spec.width, spec.height), Image.BILINEAR)
        image = np.asarray(pil)
    data = normalize(image, spec.value_range)
    return InputTensor(data=data, spec=spec)


def preprocess_batch(samples, spec: InputSpec):
    """Decode and preprocess a list of ImageSamples into a stacked batch.

    Returns (tensor of shape (n, h, w, 3) float32, int label vector of
    length n) in input order. A decode failure is re-raised with the index
    of the failing sample.
    """
    from .dataset import load_image

    tensors = []
    labels = []
    for i, sample in enumerate(samples):
        try:
            buf = load_image(sample.path)
        except DecodeError as exc:
            raise DecodeError(exc.path, reason=str(exc), index=i) from exc
        tensors.append(preprocess_image(buf, spec).data)
        labels.append(sample.class_index)
    if not tensors:
        batch = np.zeros((0, spec.height, spec.width, 3), dtype=np.float32)
    else:
        batch = np.stack(tensors).astype(np.float32)
    return batch, np.asarray(labels, dtype=np.int64)
