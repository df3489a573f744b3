"""Shared fixtures: synthetic datasets and one session-wide trained model."""

import numpy as np
import pytest
from PIL import Image

import skinbench as sb
from skinbench.training import TrainConfig, train

# Seven classes separable by mean color; the mild noise keeps the images
# from being byte-identical without breaking separability.
CLASS_COLORS = {
    "acne": (200, 30, 30),
    "chickenpox": (30, 200, 30),
    "eczema": (30, 30, 200),
    "pityriasis": (200, 200, 30),
    "psoriasis": (30, 200, 200),
    "tinea": (200, 30, 200),
    "vitiligo": (128, 128, 128),
}

TRAIN_CONFIG = TrainConfig(learning_rate=1e-2, epochs=5, batch_size=32, seed=42)
SPLIT_RATIOS = (0.70, 0.15, 0.15)
SPLIT_SEED = 42


def write_class_images(root, colors, per_class, size=64, seed=0, noise=12):
    rng = np.random.default_rng(seed)
    for name, color in colors.items():
        d = root / name
        d.mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            arr = np.full((size, size, 3), color, dtype=np.int16)
            arr = np.clip(arr + rng.integers(-noise, noise + 1, arr.shape), 0, 255)
            Image.fromarray(arr.astype(np.uint8)).save(d / f"img{i:03d}.jpeg", quality=92)


def solid_image(path, color, size=64):
    Image.fromarray(np.full((size, size, 3), color, dtype=np.uint8)).save(path, quality=95)


@pytest.fixture(scope="session")
def synthetic_root(tmp_path_factory):
    root = tmp_path_factory.mktemp("dataset") / "skin"
    write_class_images(root, CLASS_COLORS, per_class=30)
    return root


@pytest.fixture(scope="session")
def manifest(synthetic_root):
    return sb.scan_dataset(synthetic_root)


@pytest.fixture(scope="session")
def split(manifest):
    return sb.split_dataset(manifest, SPLIT_RATIOS, SPLIT_SEED)


@pytest.fixture(scope="session")
def trained(manifest, split, tmp_path_factory):
    """A MobileNet classifier trained on the synthetic dataset (random weights)."""
    model = sb.build_classifier(
        "MobileNet", manifest.num_classes, weights="random", seed=1,
        class_names=manifest.class_names,
    )
    artifact_path = tmp_path_factory.mktemp("artifacts") / "mobilenet.skbm"
    artifact, history = train(model, split.train, split.val, TRAIN_CONFIG, artifact_path)
    return {"model": model, "artifact": artifact, "history": history, "config": TRAIN_CONFIG}


@pytest.fixture(scope="session")
def probe_batch(split):
    """16 preprocessed test images for round-trip prediction checks."""
    from skinbench.preprocess import preprocess_batch

    spec = sb.required_input("MobileNet")
    tensors, labels = preprocess_batch(split.test[:16], spec)
    return tensors, labels
