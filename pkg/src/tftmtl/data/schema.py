"""Product-day record schema, validation and CSV I/O."""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from ..errors import ValidationError

COLUMNS = (
    "date",
    "product_id",
    "daily_sales",
    "inventory_level",
    "price",
    "discount_rate",
    "ad_spend",
    "page_views",
    "category",
    "brand",
    "is_holiday",
    "day_of_week",
    "lead_time",
)
NUMERIC_COLUMNS = (
    "daily_sales", "inventory_level", "price", "discount_rate", "ad_spend",
    "page_views", "is_holiday", "day_of_week", "lead_time",
)
CATEGORICAL_COLUMNS = ("product_id", "category", "brand")


@dataclass(frozen=True)
class ProductDayRecord:
    date: str
    product_id: str
    daily_sales: float
    inventory_level: float
    price: float
    discount_rate: float
    ad_spend: float
    page_views: float
    category: str
    brand: str
    is_holiday: int
    day_of_week: int
    lead_time: float


@dataclass(frozen=True)
class Violation:
    row: int | None
    field: str
    rule: str

    def __str__(self) -> str:
        where = "dataset" if self.row is None else f"row {self.row}"
        return f"{where}: {self.field}: {self.rule}"


_BOUNDS = (
    ("daily_sales", lambda s: s >= 0, "must be >= 0"),
    ("inventory_level", lambda s: s >= 0, "must be >= 0"),
    ("price", lambda s: s > 0, "must be > 0"),
    ("discount_rate", lambda s: (s >= 0) & (s <= 1), "must lie in [0, 1]"),
    ("ad_spend", lambda s: s >= 0, "must be >= 0"),
    ("page_views", lambda s: s >= 0, "must be >= 0"),
    ("is_holiday", lambda s: s.isin([0, 1]), "must be 0 or 1"),
    ("day_of_week", lambda s: (s >= 1) & (s <= 7), "must lie in 1..7"),
    ("lead_time", lambda s: s > 0, "must be > 0"),
)


def validate_schema(records: pd.DataFrame) -> list[Violation]:
    """Every broken record invariant as a :class:`Violation`; empty means ok."""
    missing = [c for c in COLUMNS if c not in records.columns]
    if missing:
        return [Violation(None, c, "column missing") for c in missing]
    out: list[Violation] = []
    df = records.reset_index(drop=True)
    dates = pd.to_datetime(df["date"], errors="coerce")
    for i in np.flatnonzero(dates.isna().to_numpy()):
        out.append(Violation(int(i), "date", "not an ISO-8601 date"))
    for col in NUMERIC_COLUMNS:
        values = pd.to_numeric(df[col], errors="coerce")
        bad_num = ~np.isfinite(values.to_numpy(dtype=float, na_value=np.nan))
        for i in np.flatnonzero(bad_num):
            out.append(Violation(int(i), col, "not a finite number"))
    num = df[list(NUMERIC_COLUMNS)].apply(pd.to_numeric, errors="coerce")
    for col, ok, rule in _BOUNDS:
        bad = ~ok(num[col]).to_numpy() & num[col].notna().to_numpy()
        for i in np.flatnonzero(bad):
            out.append(Violation(int(i), col, rule))
    valid_dates = dates.notna() & num["day_of_week"].notna()
    iso = dates.dt.dayofweek + 1
    for i in np.flatnonzero((valid_dates & (iso != num["day_of_week"])).to_numpy()):
        out.append(Violation(int(i), "day_of_week", f"inconsistent with date (expected {int(iso[i])})"))
    for col in CATEGORICAL_COLUMNS:
        for i in np.flatnonzero(df[col].isna().to_numpy()):
            out.append(Violation(int(i), col, "missing category"))

    for pid, group in df.assign(_d=dates).groupby("product_id", sort=True):
        d = group["_d"]
        if d.isna().any():
            continue
        rows = group.index.to_numpy()
        gaps = d.diff().dt.days.to_numpy()[1:]
        for j in np.flatnonzero(gaps != 1):
            rule = "duplicate date" if gaps[j] == 0 else (
                f"date gap of {int(gaps[j])} days" if gaps[j] > 1 else "dates out of order")
            out.append(Violation(int(rows[j + 1]), "date", f"contiguity broken for {pid}: {rule}"))
    out.sort(key=lambda v: (-1 if v.row is None else v.row, v.field))
    return out


def read_dataset(path: str | Path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={"product_id": str, "category": str, "brand": str}, encoding="utf-8")
    if list(df.columns) != list(COLUMNS):
        raise ValidationError(f"CSV header {list(df.columns)} does not match expected {list(COLUMNS)}")
    return df


def write_dataset(records: pd.DataFrame, path: str | Path) -> None:
    """Write atomically: a failure leaves no partial file at ``path``."""
    path = Path(path)
    df = records.loc[:, list(COLUMNS)].sort_values(["product_id", "date"], kind="mergesort")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            df.to_csv(fh, index=False, lineterminator="\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
