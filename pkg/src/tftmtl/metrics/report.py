"""Per-model metric reports and the comparison table."""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, UndefinedMetricError
from .core import mae, mape, mtes, r_squared, rmse

TASKS = ("sales", "inventory")
TABLE_COLUMNS = ("Model", "Sales RMSE", "Sales MAPE (%)", "Inventory RMSE", "Inventory MAPE (%)", "R²", "MTES")

# Published comparison rows (real-data results, shown for layout and reference).
REFERENCE_ROWS = (
    ("LSTM", 54.12, 12.41, 50.83, 11.96, 0.864, 0.781),
    ("GRU", 51.38, 11.72, 48.92, 11.24, 0.872, 0.802),
    ("N-BEATS", 49.17, 10.95, 46.55, 10.76, 0.884, 0.819),
    ("TCN", 47.86, 10.61, 45.02, 10.28, 0.891, 0.831),
    ("TFT (single-task)", 45.36, 9.94, 42.57, 9.63, 0.903, 0.861),
    ("TFT-MTL (proposed)", 42.57, 8.68, 39.86, 8.43, 0.924, 0.894),
)


@dataclass(frozen=True)
class TaskMetrics:
    rmse: float
    mae: float
    mape_percent: float
    r_squared: float | None  # None when y has no variance


@dataclass
class MetricsReport:
    tasks: dict[str, TaskMetrics] = field(default_factory=dict)
    pooled_r_squared: float | None = None
    mtes: float | None = None
    num_predictions: int = 0

    def get(self, task: str) -> TaskMetrics | None:
        return self.tasks.get(task)

    def to_dict(self) -> dict:
        out: dict = {"num_predictions": self.num_predictions, "pooled_r_squared": self.pooled_r_squared,
                     "mtes": self.mtes}
        for task, m in self.tasks.items():
            for k in ("rmse", "mae", "mape_percent", "r_squared"):
                out[f"{task}.{k}"] = getattr(m, k)
        return out

    def to_text(self) -> str:
        """``key = value`` lines in sorted key order; floats as shortest round-trip repr."""
        lines = []
        for k, v in sorted(self.to_dict().items()):
            lines.append(f"{k} = {'NA' if v is None else repr(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> MetricsReport:
        raw = {}
        for line in text.splitlines():
            if line.strip():
                k, v = (s.strip() for s in line.split("=", 1))
                raw[k] = None if v == "NA" else float(v)
        tasks = {}
        for t in TASKS:
            if f"{t}.rmse" in raw:
                tasks[t] = TaskMetrics(raw[f"{t}.rmse"], raw[f"{t}.mae"], raw[f"{t}.mape_percent"],
                                       raw[f"{t}.r_squared"])
        return cls(tasks, raw.get("pooled_r_squared"), raw.get("mtes"), int(raw.get("num_predictions") or 0))


def _safe_r2(y, y_hat) -> float | None:
    try:
        return r_squared(y, y_hat)
    except UndefinedMetricError:
        return None


def evaluate_predictions(predictions: Mapping[str, np.ndarray], targets: Mapping[str, np.ndarray],
                         mape_floor: float = 1.0) -> MetricsReport:
    """Metrics for every task present in ``predictions``; pooled R² stacks the tasks."""
    tasks: dict[str, TaskMetrics] = {}
    ys, yhs = [], []
    count = 0
    for task in TASKS:
        if task not in predictions or predictions[task] is None:
            continue
        y = np.asarray(targets[task], dtype=np.float64)
        yh = np.asarray(predictions[task], dtype=np.float64)
        if y.shape != yh.shape:
            raise ContractError(f"{task}: predictions {yh.shape} vs targets {y.shape}")
        tasks[task] = TaskMetrics(rmse(y, yh), mae(y, yh), mape(y, yh, mape_floor), _safe_r2(y, yh))
        ys.append(y.ravel())
        yhs.append(yh.ravel())
        count = max(count, y.size)
    if not tasks:
        raise ContractError("no task predictions to evaluate")
    pooled = _safe_r2(np.concatenate(ys), np.concatenate(yhs))
    joint = mtes(tasks["sales"].mape_percent, tasks["inventory"].mape_percent) if len(tasks) == 2 else None
    return MetricsReport(tasks, pooled, joint, count)


def _row_values(report) -> tuple:
    if isinstance(report, MetricsReport):
        s, i = report.get("sales"), report.get("inventory")
        return (s and s.rmse, s and s.mape_percent, i and i.rmse, i and i.mape_percent,
                report.pooled_r_squared, report.mtes)
    return tuple(report)


def _fmt(v, digits: int) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "-"
    return f"{v:.{digits}f}"


def emit_comparison_table(rows: Sequence[tuple[str, object]]) -> tuple[str, str]:
    """Text table (2 decimals for errors, 3 for R² and MTES) and an unrounded CSV.

    Each row is ``(name, MetricsReport)`` or ``(name, (sales_rmse, sales_mape,
    inventory_rmse, inventory_mape, r2, mtes))``; missing values render as ``-``.
    """
    if not rows:
        raise ContractError("comparison table needs at least one row")
    digits = (2, 2, 2, 2, 3, 3)
    cells = [list(TABLE_COLUMNS)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TABLE_COLUMNS)
    for name, report in rows:
        values = _row_values(report)
        cells.append([name] + [_fmt(v, d) for v, d in zip(values, digits)])
        writer.writerow([name] + ["" if v is None else repr(float(v)) for v in values])
    widths = [max(len(r[j]) for r in cells) for j in range(len(TABLE_COLUMNS))]
    lines = []
    for n, r in enumerate(cells):
        lines.append("  ".join(c.ljust(w) if j == 0 else c.rjust(w) for j, (c, w) in enumerate(zip(r, widths))))
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n", buf.getvalue()


def parse_comparison_csv(text: str) -> list[tuple[str, tuple]]:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != TABLE_COLUMNS:
        raise ContractError(f"unexpected comparison header {header}")
    return [(r[0], tuple(None if c == "" else float(c) for c in r[1:])) for r in reader]


def reference_table() -> tuple[str, str]:
    return emit_comparison_table([(r[0], r[1:]) for r in REFERENCE_ROWS])
