"""Chronological train / validation / test split on the global date axis."""

from __future__ import annotations

import calendar
import datetime as dt
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..errors import ValidationError
from .windows import WindowSample


def shift_months(day: dt.date, months: int) -> dt.date:
    """Calendar month shift, clamping the day to the target month's length."""
    total = day.year * 12 + (day.month - 1) + months
    year, month = divmod(total, 12)
    month += 1
    return dt.date(year, month, min(day.day, calendar.monthrange(year, month)[1]))


@dataclass
class TimeSplit:
    train: pd.DataFrame
    val: pd.DataFrame
    test: pd.DataFrame
    start: dt.date
    val_start: dt.date
    test_start: dt.date
    end: dt.date


def split_by_time(records: pd.DataFrame, test_months: int = 6, val_months: int = 3) -> TimeSplit:
    """Test = last ``test_months`` months, validation the ``val_months`` before, train the rest."""
    if records.empty:
        raise ValidationError("cannot split an empty dataset")
    if test_months < 1 or val_months < 1:
        raise ValidationError("test_months and val_months must be positive")
    dates = pd.to_datetime(records["date"]).dt.date
    start, end = dates.min(), dates.max()
    test_start = shift_months(end, -test_months) + dt.timedelta(days=1)
    val_start = shift_months(test_start, -val_months)
    if val_start <= start:
        raise ValidationError(
            f"data spans {start}..{end}; need more than {test_months + val_months} months "
            f"to hold a {val_months}-month validation and {test_months}-month test period"
        )
    train = records[(dates < val_start).to_numpy()]
    val = records[((dates >= val_start) & (dates < test_start)).to_numpy()]
    test = records[(dates >= test_start).to_numpy()]
    return TimeSplit(train, val, test, start, val_start, test_start, end)


@dataclass
class WindowSplits:
    train: list[WindowSample]
    val: list[WindowSample]
    test: list[WindowSample]
    dropped: list[WindowSample]


def assign_windows(windows: Sequence[WindowSample], split: TimeSplit) -> WindowSplits:
    """Place each window by its target dates; windows straddling a boundary are dropped."""
    val_start = np.datetime64(split.val_start, "D")
    test_start = np.datetime64(split.test_start, "D")
    out = WindowSplits([], [], [], [])
    for w in windows:
        first = w.origin[1]
        last = first + np.timedelta64(w.target_sales.size - 1, "D")
        if last < val_start:
            out.train.append(w)
        elif first >= val_start and last < test_start:
            out.val.append(w)
        elif first >= test_start:
            out.test.append(w)
        else:
            out.dropped.append(w)
    return out
