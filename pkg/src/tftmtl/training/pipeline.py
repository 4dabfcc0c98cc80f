"""Split, normalize and window a dataset; build and fit models on it."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import pandas as pd

from ..data.generator import GeneratorConfig
from ..data.normalize import DYNAMIC_FEATURES, NormalizerStats, StaticEncoder, fit_normalizer
from ..data.split import TimeSplit, assign_windows, split_by_time
from ..data.windows import WindowSet, check_features, make_windows, prepare_series
from ..errors import ValidationError
from ..model.config import ModelConfig
from ..model.tft import TFTMultiTask
from .checkpoint import Checkpoint
from .gru import GRUBaseline
from .trainer import TrainConfig, TrainResult, train

MODEL_KINDS = {"tft": TFTMultiTask, "gru": GRUBaseline}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs besides the data file. JSON sections map to fields."""

    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    test_months: int = 6
    val_months: int = 3
    stride: int = 1
    features: tuple[str, ...] = DYNAMIC_FEATURES

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", check_features(self.features))
        if self.stride < 1:
            raise ValidationError("stride must be positive")

    def to_dict(self) -> dict:
        return {
            "generator": self.generator.to_dict(),
            "train": self.train.to_dict(),
            "test_months": self.test_months,
            "val_months": self.val_months,
            "stride": self.stride,
            "features": list(self.features),
        }

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown config sections: {sorted(unknown)}")
        kw = dict(d)
        if "generator" in kw:
            kw["generator"] = GeneratorConfig.from_dict(kw["generator"])
        if "train" in kw:
            kw["train"] = TrainConfig.from_dict(kw["train"])
        if "features" in kw:
            kw["features"] = tuple(kw["features"])
        return cls(**kw)


@dataclass
class Prepared:
    split: TimeSplit
    normalizer: NormalizerStats
    encoder: StaticEncoder
    features: tuple[str, ...]
    train: WindowSet
    val: WindowSet
    test: WindowSet
    dropped: int
    model_config: ModelConfig
    test_months: int
    val_months: int
    stride: int

    def target_access(self) -> dict[str, int]:
        return {s.name: s.target_reads for s in (self.train, self.val, self.test)}

    def checksums(self) -> dict[str, str]:
        return {"train": self.train.checksum(), "val": self.val.checksum(), "test": self.test.checksum()}


def prepare(records: pd.DataFrame, cfg: ExperimentConfig) -> Prepared:
    """Statistics and vocabularies come from training-period rows only."""
    split = split_by_time(records, cfg.test_months, cfg.val_months)
    normalizer = fit_normalizer(split.train)
    encoder = StaticEncoder.fit(split.train)
    m = cfg.train.model
    series = prepare_series(records, normalizer, encoder, cfg.features)
    windows = make_windows(series, m.lookback, m.horizon, cfg.stride)
    parts = assign_windows(windows, split)
    model_config = dataclasses.replace(m, num_dynamic_vars=len(cfg.features),
                                       static_vocab_sizes=encoder.sizes)
    sets = {name: WindowSet(getattr(parts, name), normalizer, name) for name in ("train", "val", "test")}
    return Prepared(split, normalizer, encoder, cfg.features, sets["train"], sets["val"], sets["test"],
                    len(parts.dropped),
                    model_config, cfg.test_months, cfg.val_months, cfg.stride)


def build_model(kind: str, config: ModelConfig):
    try:
        return MODEL_KINDS[kind](config)
    except KeyError:
        raise ValidationError(f"unknown model kind {kind!r}; choose from {sorted(MODEL_KINDS)}") from None


def fit(prep: Prepared, train_cfg: TrainConfig, kind: str = "tft",
        tasks: tuple[str, ...] | None = None) -> tuple[object, TrainResult, Checkpoint]:
    config = prep.model_config if tasks is None else dataclasses.replace(prep.model_config, tasks=tasks)
    model = build_model(kind, config)
    result = train(model, model.init_params(train_cfg.seed), prep.train, prep.val, train_cfg)
    ckpt = Checkpoint(
        model_kind=kind,
        model_config=config,
        params=result.best_params,
        optimizer=result.best_optimizer,
        epoch=result.best_epoch,
        normalizer=prep.normalizer,
        encoder=prep.encoder,
        features=prep.features,
        meta={"train": train_cfg.to_dict(), "test_months": prep.test_months,
              "val_months": prep.val_months, "stride": prep.stride},
    )
    return model, result, ckpt


def model_from_checkpoint(ckpt: Checkpoint):
    return build_model(ckpt.model_kind, ckpt.model_config)


def windows_for_checkpoint(records: pd.DataFrame, ckpt: Checkpoint, test_months: int, val_months: int,
                           stride: int = 1):
    """Re-window ``records`` with the checkpoint's own statistics and vocabularies."""
    split = split_by_time(records, test_months, val_months)
    series = prepare_series(records, ckpt.normalizer, ckpt.encoder, ckpt.features)
    m = ckpt.model_config
    parts = assign_windows(make_windows(series, m.lookback, m.horizon, stride), split)
    return split, {name: WindowSet(getattr(parts, name), ckpt.normalizer, name) for name in ("train", "val", "test")}
