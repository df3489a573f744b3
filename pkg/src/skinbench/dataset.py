"""Directory-per-class image dataset: discovery, splitting, decoding.

Expected layout:

    <root>/
        acne/        img001.jpeg ...
        eczema/      ...
        vitiligo/    ...

Each immediate subdirectory of the root is one class. Class indices are
assigned by lexicographic order of the directory names so that label
assignment is reproducible across machines and scan order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    BadRatios,
    DecodeError,
    EmptyClass,
    EmptyDataset,
    MissingRoot,
)

JPEG_EXTENSIONS = {".jpg", ".jpeg"}
PNG_EXTENSIONS = {".png"}


@dataclass(frozen=True)
class ImageSample:
    path: Path
    class_name: str
    class_index: int


@dataclass
class DatasetManifest:
    root: Path
    class_names: list[str]
    samples: list[ImageSample]
    counts_per_class: dict[str, int] = field(default_factory=dict)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def __len__(self) -> int:
        return len(self.samples)

    def checksum(self) -> str:
        """Stable digest of the relative sample paths and labels."""
        import hashlib

        h = hashlib.sha256()
        for s in self.samples:
            rel = s.path.relative_to(self.root).as_posix()
            h.update(f"{rel}\t{s.class_index}\n".encode())
        return h.hexdigest()


@dataclass
class SplitManifest:
    train: list[ImageSample]
    val: list[ImageSample]
    test: list[ImageSample]
    seed: int
    ratios: tuple[float, float, float]

    def split(self, name: str) -> list[ImageSample]:
        return {"train": self.train, "val": self.val, "test": self.test}[name]


def _supported_extensions(accept_png: bool) -> set[str]:
    exts = set(JPEG_EXTENSIONS)
    if accept_png:
        exts |= PNG_EXTENSIONS
    return exts


def scan_dataset(root, accept_png: bool = False) -> DatasetManifest:
    """Walk one level of class subdirectories and build a manifest.

    Files whose extension is not supported are silently skipped. Raises
    MissingRoot if the root does not exist and EmptyDataset if no class
    directory contributes at least one image.
    """
    root = Path(root)
    if not root.is_dir():
        raise MissingRoot(f"dataset root does not exist: {root}")

    exts = _supported_extensions(accept_png)
    per_class: dict[str, list[Path]] = {}
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        files = sorted(
            f for f in sub.iterdir()
            if f.is_file() and f.suffix.lower() in exts
        )
        if files:
            per_class[sub.name] = files

    if not per_class:
        raise EmptyDataset(f"no class subdirectory under {root} contains a supported image")

    class_names = sorted(per_class)
    samples = [
        ImageSample(path=f, class_name=name, class_index=idx)
        for idx, name in enumerate(class_names)
        for f in per_class[name]
    ]
    counts = {name: len(per_class[name]) for name in class_names}
    return DatasetManifest(root=root, class_names=class_names, samples=samples, counts_per_class=counts)


def split_dataset(manifest: DatasetManifest, ratios, seed: int) -> SplitManifest:
    """Stratified train/val/test partition of a manifest.

    Within each class the samples are shuffled by a seeded permutation and
    sliced. Counts per class: floor(n * r_train) train, floor(n * r_val)
    val, remainder test; if that leaves train empty for a nonempty class,
    one sample is moved into train from the largest of the other buckets.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise BadRatios(f"need three nonnegative ratios, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise BadRatios(f"ratios must sum to 1, got {ratios} (sum {sum(ratios)})")

    by_class: dict[str, list[ImageSample]] = {name: [] for name in manifest.class_names}
    for s in manifest.samples:
        by_class[s.class_name].append(s)

    train: list[ImageSample] = []
    val: list[ImageSample] = []
    test: list[ImageSample] = []
    for ci, name in enumerate(manifest.class_names):
        group = by_class[name]
        if not group:
            raise EmptyClass(f"class {name!r} has no samples")
        # Per-class stream so adding a class never perturbs the others.
        rng = np.random.default_rng([seed, ci])
        order = rng.permutation(len(group))
        shuffled = [group[i] for i in order]

        n = len(group)
        n_train = int(np.floor(n * ratios[0]))
        n_val = int(np.floor(n * ratios[1]))
        buckets = [
            shuffled[:n_train],
            shuffled[n_train:n_train + n_val],
            shuffled[n_train + n_val:],
        ]
        if not buckets[0]:
            donor = max(range(1, 3), key=lambda i: len(buckets[i]))
            buckets[0].append(buckets[donor].pop())
        train += buckets[0]
        val += buckets[1]
        test += buckets[2]

    return SplitManifest(train=train, val=val, test=test, seed=seed, ratios=ratios)


def load_image(path) -> np.ndarray:
    """Decode an image file into an (h, w, 3) uint8 array.

    Grayscale sources are replicated across the three channels; alpha
    channels are dropped. Any decode failure raises DecodeError carrying
    the offending path.
    """
    path = Path(path)
    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("RGB"), dtype=np.uint8)
    except FileNotFoundError as exc:
        raise DecodeError(path, reason="file not found") from exc
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(path, reason=str(exc)) from exc
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DecodeError(path, reason=f"unexpected decoded shape {arr.shape}")
    return arr


def save_split(split: SplitManifest, manifest: DatasetManifest, path) -> None:
    """Persist a split as JSON (relative paths per bucket + seed + ratios)."""
    doc = {
        "seed": split.seed,
        "ratios": list(split.ratios),
        "class_names": manifest.class_names,
        "splits": {
            name: [s.path.relative_to(manifest.root).as_posix() for s in split.split(name)]
            for name in ("train", "val", "test")
        },
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_split(path, manifest: DatasetManifest) -> SplitManifest:
    """Re-materialize a persisted split against a manifest of the same root."""
    doc = json.loads(Path(path).read_text())
    by_rel = {s.path.relative_to(manifest.root).as_posix(): s for s in manifest.samples}
    buckets = {}
    for name in ("train", "val", "test"):
        buckets[name] = [by_rel[rel] for rel in doc["splits"][name]]
    return SplitManifest(
        train=buckets["train"],
        val=buckets["val"],
        test=buckets["test"],
        seed=int(doc["seed"]),
        ratios=tuple(doc["ratios"]),
    )
