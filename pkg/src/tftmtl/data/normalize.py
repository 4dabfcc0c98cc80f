"""Per-product z-scoring of dynamic features and static category codes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..errors import ContractError

STD_FLOOR = 1e-6

# z-scored per product; calendar inputs get a fixed affine map instead
# (a per-product std of an all-zero holiday flag would be the floor).
NORMALIZED_FEATURES = (
    "daily_sales", "inventory_level", "price", "discount_rate", "ad_spend", "page_views", "lead_time",
)
CALENDAR_FEATURES = ("is_holiday", "day_of_week")
DYNAMIC_FEATURES = NORMALIZED_FEATURES + CALENDAR_FEATURES
TARGET_FEATURES = {"sales": "daily_sales", "inventory": "inventory_level"}


@dataclass
class NormalizerStats:
    features: tuple[str, ...]
    mean: dict[str, np.ndarray]  # product_id -> [F]
    std: dict[str, np.ndarray]
    global_mean: np.ndarray
    global_std: np.ndarray

    def lookup(self, product_id: str) -> tuple[np.ndarray, np.ndarray]:
        """Per-product statistics, or the global ones for an unseen product."""
        if product_id in self.mean:
            return self.mean[product_id], self.std[product_id]
        return self.global_mean, self.global_std

    def feature_stats(self, product_id: str, feature: str) -> tuple[float, float]:
        j = self.features.index(feature)
        mu, sd = self.lookup(product_id)
        return float(mu[j]), float(sd[j])

    def to_dict(self) -> dict:
        products = sorted(self.mean)
        return {
            "features": list(self.features),
            "products": products,
            "mean": np.array([self.mean[p] for p in products]).reshape(len(products), len(self.features)),
            "std": np.array([self.std[p] for p in products]).reshape(len(products), len(self.features)),
            "global_mean": self.global_mean,
            "global_std": self.global_std,
        }

    @classmethod
    def from_dict(cls, d: dict) -> NormalizerStats:
        products = list(d["products"])
        mean = np.asarray(d["mean"]).reshape(len(products), -1)
        std = np.asarray(d["std"]).reshape(len(products), -1)
        return cls(
            features=tuple(d["features"]),
            mean={p: mean[i] for i, p in enumerate(products)},
            std={p: std[i] for i, p in enumerate(products)},
            global_mean=np.asarray(d["global_mean"], dtype=np.float64),
            global_std=np.asarray(d["global_std"], dtype=np.float64),
        )


def fit_normalizer(train: pd.DataFrame, features=NORMALIZED_FEATURES) -> NormalizerStats:
    if train.empty:
        raise ContractError("cannot fit a normalizer on an empty training split")
    features = tuple(features)
    values = train.loc[:, list(features)].to_numpy(dtype=np.float64)
    mean, std = {}, {}
    for pid, idx in train.groupby("product_id", sort=True).indices.items():
        mean[pid], std[pid] = _moments(values[idx])
    return NormalizerStats(features, mean, std, *_moments(values))


def _moments(block: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = block.mean(axis=0)
    # a summed mean of a repeated value can miss it by an ulp, which the
    # std floor would blow up to ~1e-8; pin constant columns exactly
    constant = np.all(block == block[:1], axis=0)
    mu = np.where(constant, block[0], mu)
    return mu, np.maximum(block.std(axis=0), STD_FLOOR)


def apply_normalizer(stats: NormalizerStats, records: pd.DataFrame) -> np.ndarray:
    """``[N, F]`` z-scores for the normalizer's features, row-aligned with ``records``."""
    values = records.loc[:, list(stats.features)].to_numpy(dtype=np.float64)
    out = np.empty_like(values)
    pids = records["product_id"].to_numpy()
    for pid in pd.unique(pids):
        rows = pids == pid
        mu, sd = stats.lookup(pid)
        out[rows] = (values[rows] - mu) / sd
    return out


def denormalize(stats: NormalizerStats, records: pd.DataFrame, normalized: np.ndarray) -> np.ndarray:
    out = np.empty_like(normalized)
    pids = records["product_id"].to_numpy()
    for pid in pd.unique(pids):
        rows = pids == pid
        mu, sd = stats.lookup(pid)
        out[rows] = normalized[rows] * sd + mu
    return out


def calendar_features(records: pd.DataFrame) -> np.ndarray:
    """``[N, 2]``: holiday flag as is, day of week mapped 1..7 -> -1.5..1.5."""
    hol = records["is_holiday"].to_numpy(dtype=np.float64)
    dow = (records["day_of_week"].to_numpy(dtype=np.float64) - 4.0) / 2.0
    return np.stack([hol, dow], axis=1)


@dataclass
class StaticEncoder:
    """Category -> integer code per static field; code 0 is reserved for unseen values."""

    vocab: dict[str, list[str]] = field(default_factory=dict)

    @classmethod
    def fit(cls, records: pd.DataFrame, fields=("product_id", "category", "brand")) -> StaticEncoder:
        return cls({f: sorted(map(str, pd.unique(records[f]))) for f in fields})

    @property
    def sizes(self) -> dict[str, int]:
        return {f: len(v) + 1 for f, v in self.vocab.items()}

    def encode(self, field_name: str, value) -> int:
        values = self.vocab[field_name]
        value = str(value)
        # vocab lists are sorted
        i = int(np.searchsorted(values, value))
        return i + 1 if i < len(values) and values[i] == value else 0

    def codes(self, row: dict) -> np.ndarray:
        return np.array([self.encode(f, row[f]) for f in self.vocab], dtype=np.int64)

    def to_dict(self) -> dict:
        return {f: list(v) for f, v in self.vocab.items()}

    @classmethod
    def from_dict(cls, d: dict) -> StaticEncoder:
        return cls({f: list(v) for f, v in d.items()})
