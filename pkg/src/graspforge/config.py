"""Merged pipeline configuration: one JSON document drives every command."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .augment import AugmentConfig
from .errors import ConfigError
from .grasping import GraspConfig
from .model import ModelConfig, TrainPhases
from .rarity import RarityConfig

__all__ = ["PipelineConfig"]


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    coerced = dict(data)
    for f in fields(cls):
        if f.name in coerced and isinstance(coerced[f.name], list):
            coerced[f.name] = tuple(coerced[f.name])
    try:
        return cls(**coerced)
    except (TypeError, ValueError, ConfigError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainPhases = field(default_factory=TrainPhases)
    rarity: RarityConfig = field(default_factory=RarityConfig)
    grasp: GraspConfig = field(default_factory=GraspConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)

    @classmethod
    def from_dict(cls, data) -> "PipelineConfig":
        if not isinstance(data, dict):
            raise ConfigError("pipeline config must be a JSON object")
        unknown = set(data) - {"seed", "model", "train", "rarity", "grasp", "augment"}
        if unknown:
            raise ConfigError(f"pipeline config: unknown sections {sorted(unknown)}")
        seed = data.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        return cls(
            seed=seed,
            model=_build(ModelConfig, data.get("model", {}), "model"),
            train=_build(TrainPhases, data.get("train", {}), "train"),
            rarity=_build(RarityConfig, data.get("rarity", {}), "rarity"),
            grasp=_build(GraspConfig, data.get("grasp", {}), "grasp"),
            augment=_build(AugmentConfig, data.get("augment", {}), "augment"),
        )

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_seed(self, seed: int) -> "PipelineConfig":
        return PipelineConfig(
            seed=seed, model=self.model, train=self.train,
            rarity=self.rarity, grasp=self.grasp, augment=self.augment,
        )
