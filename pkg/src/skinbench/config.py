"""Run configuration: JSON config file plus command-line overrides."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import model_zoo
from .errors import BadConfig
from .training import TrainConfig

DEFAULT_RATIOS = (0.70, 0.15, 0.15)


@dataclass
class RunConfig:
    dataset_root: str = ""
    output_dir: str = "runs"
    ratios: tuple[float, float, float] = DEFAULT_RATIOS
    seed: int = 42
    backbones: list[str] = field(default_factory=lambda: [s.id for s in model_zoo.list_backbones()])
    learning_rate: float = 1e-4
    epochs: int = 20
    batch_size: int = 32
    random_init: bool = False
    accept_png: bool = False
    freeze: bool = True
    load_repetitions: int = 3

    def __post_init__(self):
        self.ratios = tuple(float(r) for r in self.ratios)
        if len(self.ratios) != 3:
            raise BadConfig(f"ratios must have three components, got {self.ratios}")
        # Resolves aliases and raises UnknownBackbone for anything unregistered.
        self.backbones = [model_zoo.get_backbone(b).id for b in self.backbones]

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
        )

    def weights_mode(self) -> str:
        return "random" if self.random_init else "pretrained"

    def to_dict(self) -> dict:
        return {
            "dataset_root": self.dataset_root,
            "output_dir": self.output_dir,
            "ratios": list(self.ratios),
            "seed": self.seed,
            "backbones": list(self.backbones),
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "random_init": self.random_init,
            "accept_png": self.accept_png,
            "freeze": self.freeze,
            "load_repetitions": self.load_repetitions,
        }


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an optional JSON file and override mapping.

    Command-line overrides win over the file; unknown keys in the file are
    rejected so typos fail loudly.
    """
    values: dict = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise BadConfig(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise BadConfig(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise BadConfig(f"config file {path} must contain a JSON object")
        allowed = set(RunConfig().to_dict())
        unknown = set(doc) - allowed
        if unknown:
            raise BadConfig(f"unknown config keys in {path}: {sorted(unknown)}")
        values.update(doc)
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise BadConfig(str(exc)) from exc
