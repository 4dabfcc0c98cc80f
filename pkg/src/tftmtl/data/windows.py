"""Per-product series assembly and sliding-window supervised samples."""

from __future__ import annotations

import hashlib
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..errors import ValidationError
from ..model.tft import Batch
from .normalize import (
    CALENDAR_FEATURES,
    DYNAMIC_FEATURES,
    TARGET_FEATURES,
    NormalizerStats,
    StaticEncoder,
    calendar_features,
)


@dataclass
class ProductSeries:
    product_id: str
    dates: np.ndarray  # datetime64[D]
    dynamic: np.ndarray  # [N, V] model-space features
    sales: np.ndarray  # [N] original units
    inventory: np.ndarray
    known: np.ndarray  # [N, 2] day_of_week, is_holiday (raw)
    static: np.ndarray  # [3] codes

    def __len__(self) -> int:
        return self.dates.size


@dataclass
class WindowSample:
    dynamic_past: np.ndarray  # [lookback, V]
    known_future: np.ndarray  # [horizon, 2]
    static: np.ndarray  # [3]
    target_sales: np.ndarray  # [horizon], original units
    target_inventory: np.ndarray
    origin: tuple[str, np.datetime64]  # product, first forecast day

    @property
    def target_dates(self) -> np.ndarray:
        return self.origin[1] + np.arange(self.target_sales.size)


def check_features(features: Sequence[str]) -> tuple[str, ...]:
    features = tuple(features)
    bad = [f for f in features if f not in DYNAMIC_FEATURES]
    if bad or not features or len(set(features)) != len(features):
        raise ValidationError(f"dynamic features must be distinct names from {DYNAMIC_FEATURES}, got {features}")
    return features


def model_features(records: pd.DataFrame, normalizer: NormalizerStats, features: Sequence[str]) -> np.ndarray:
    """``[N, V]`` inputs in model space, columns in ``features`` order."""
    features = check_features(features)
    values = records.loc[:, list(normalizer.features)].to_numpy(dtype=np.float64)
    zs = np.empty_like(values)
    pids = records["product_id"].to_numpy()
    for pid in pd.unique(pids):
        rows = pids == pid
        mu, sd = normalizer.lookup(pid)
        zs[rows] = (values[rows] - mu) / sd
    cal = calendar_features(records)
    cols = []
    for f in features:
        if f in CALENDAR_FEATURES:
            cols.append(cal[:, CALENDAR_FEATURES.index(f)])
        else:
            cols.append(zs[:, normalizer.features.index(f)])
    return np.stack(cols, axis=1)


def prepare_series(records: pd.DataFrame, normalizer: NormalizerStats, encoder: StaticEncoder,
                   features: Sequence[str] = DYNAMIC_FEATURES) -> list[ProductSeries]:
    df = records.sort_values(["product_id", "date"], kind="mergesort").reset_index(drop=True)
    dyn = model_features(df, normalizer, features)
    out = []
    for pid, idx in df.groupby("product_id", sort=True).indices.items():
        block = df.iloc[idx]
        first = block.iloc[0]
        out.append(ProductSeries(
            product_id=str(pid),
            dates=block["date"].to_numpy(dtype="datetime64[D]"),
            dynamic=dyn[idx],
            sales=block["daily_sales"].to_numpy(dtype=np.float64),
            inventory=block["inventory_level"].to_numpy(dtype=np.float64),
            known=block[["day_of_week", "is_holiday"]].to_numpy(dtype=np.float64),
            static=encoder.codes(first),
        ))
    return out


def make_windows(series: Sequence[ProductSeries], lookback: int, horizon: int, stride: int = 1) -> list[WindowSample]:
    """One sample per origin; ``len - lookback - horizon + 1`` per product at stride 1."""
    if lookback < 1 or horizon < 1 or stride < 1:
        raise ValidationError("lookback, horizon and stride must be positive")
    out: list[WindowSample] = []
    for s in series:
        for start in range(0, len(s) - lookback - horizon + 1, stride):
            mid, end = start + lookback, start + lookback + horizon
            out.append(WindowSample(
                dynamic_past=s.dynamic[start:mid],
                known_future=s.known[mid:end],
                static=s.static,
                target_sales=s.sales[mid:end],
                target_inventory=s.inventory[mid:end],
                origin=(s.product_id, s.dates[mid]),
            ))
    return out


class WindowSet:
    """Stacked windows ready for batching; targets are scaled per product."""

    def __init__(self, samples: Sequence[WindowSample], normalizer: NormalizerStats, name: str = ""):
        self.name = name
        self.target_reads = 0  # batches or raw pulls that exposed targets
        self.samples = list(samples)
        self.origins = [w.origin for w in self.samples]
        n = len(self.samples)
        if n:
            self.dynamic = np.stack([w.dynamic_past for w in self.samples])
            self.static = np.stack([w.static for w in self.samples])
            self.raw = {"sales": np.stack([w.target_sales for w in self.samples]),
                        "inventory": np.stack([w.target_inventory for w in self.samples])}
        else:
            self.dynamic = np.zeros((0, 0, 0))
            self.static = np.zeros((0, 3), dtype=np.int64)
            self.raw = {"sales": np.zeros((0, 0)), "inventory": np.zeros((0, 0))}
        self.scales: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        for task, feat in TARGET_FEATURES.items():
            stats = [normalizer.feature_stats(pid, feat) for pid, _ in self.origins]
            mu = np.array([m for m, _ in stats], dtype=np.float64)
            sd = np.array([s for _, s in stats], dtype=np.float64)
            self.scales[task] = (mu, sd)
        self.targets = {t: (self.raw[t] - self.scales[t][0][:, None]) / self.scales[t][1][:, None]
                        for t in self.raw} if n else {t: self.raw[t] for t in self.raw}

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def horizon(self) -> int:
        return self.raw["sales"].shape[1] if len(self) else 0

    def raw_targets(self) -> dict[str, np.ndarray]:
        self.target_reads += 1
        return self.raw

    def inputs(self, idx=None) -> Batch:
        """Batch without targets; scales are per-product statistics, not target values."""
        idx = np.arange(len(self)) if idx is None else np.asarray(idx)
        return Batch(
            dynamic=self.dynamic[idx],
            static=self.static[idx],
            scales={t: (mu[idx], sd[idx]) for t, (mu, sd) in self.scales.items()},
        )

    def batch(self, idx=None) -> Batch:
        self.target_reads += 1
        if idx is None:
            idx = np.arange(len(self))
        idx = np.asarray(idx)
        return Batch(
            dynamic=self.dynamic[idx],
            static=self.static[idx],
            targets={t: v[idx] for t, v in self.targets.items()},
            scales={t: (mu[idx], sd[idx]) for t, (mu, sd) in self.scales.items()},
        )

    def checksum(self) -> str:
        h = hashlib.sha256()
        for arr in (self.dynamic, self.static, self.raw["sales"], self.raw["inventory"]):
            a = np.ascontiguousarray(arr)
            h.update(str(a.shape).encode())
            h.update(a.astype("<f8" if a.dtype.kind == "f" else "<i8").tobytes())
        for pid, d in self.origins:
            h.update(f"{pid}|{d}\n".encode())
        return h.hexdigest()
