"""Point-forecast error metrics in original units."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ContractError, UndefinedMetricError


def _pair(y, y_hat) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64).ravel()
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    if y.size == 0 or y.size != y_hat.size:
        raise ContractError(f"metric inputs need equal nonzero lengths, got {y.size} and {y_hat.size}")
    return y, y_hat


def rmse(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    return math.sqrt(float(np.mean((y_hat - y) ** 2)))


def mae(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    return float(np.mean(np.abs(y_hat - y)))


def mape(y, y_hat, floor: float = 1.0) -> float:
    """Percent error with the denominator floored so zero-sales days stay finite."""
    y, y_hat = _pair(y, y_hat)
    if floor < 0:
        raise ContractError("mape floor must be nonnegative")
    denom = np.maximum(np.abs(y), floor)
    if np.any(denom == 0):
        raise UndefinedMetricError("mape with floor 0 is undefined where y == 0")
    return 100.0 * float(np.mean(np.abs(y_hat - y) / denom))


def r_squared(y, y_hat) -> float:
    y, y_hat = _pair(y, y_hat)
    if y.size < 2:
        raise UndefinedMetricError("r_squared needs at least two observations")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        raise UndefinedMetricError("r_squared is undefined when y has zero variance")
    return 1.0 - float(np.sum((y - y_hat) ** 2)) / ss_tot


def accuracy_score(mape_percent: float) -> float:
    return max(0.0, 1.0 - mape_percent / 100.0)


def mtes(sales_mape_percent: float, inventory_mape_percent: float) -> float:
    """Harmonic mean of ``1 - MAPE/100`` per task, clipped at 0."""
    if sales_mape_percent < 0 or inventory_mape_percent < 0:
        raise ContractError("MAPE values must be nonnegative")
    s1, s2 = accuracy_score(sales_mape_percent), accuracy_score(inventory_mape_percent)
    if s1 + s2 == 0:
        return 0.0
    return 2.0 * s1 * s2 / (s1 + s2)


def relative_improvement(baseline: float, candidate: float) -> float:
    """Percent reduction of ``candidate`` relative to ``baseline``."""
    if not baseline > 0:
        raise ContractError(f"baseline must be positive, got {baseline}")
    return 100.0 * (baseline - candidate) / baseline
