"""Weighted two-task MSE objective and loss-descent task weighting."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..errors import ContractError, DimensionError
from ..numerics import Tensor, as_tensor, mean, square
from .config import TaskWeights


@dataclass(frozen=True)
class LossBreakdown:
    l_sales: float
    l_inventory: float
    l_total: float
    weights_used: TaskWeights


def mse(pred: Tensor, target) -> Tensor:
    target = as_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError(f"prediction shape {pred.shape} does not match target shape {target.shape}")
    return mean(square(pred - target))


def compute_loss(y1_hat: Tensor | None, y1, y2_hat: Tensor | None, y2,
                 weights: TaskWeights) -> tuple[Tensor, LossBreakdown]:
    """``lambda_sales * MSE_sales + lambda_inventory * MSE_inventory``.

    A missing head (``None`` prediction) contributes a zero loss; its weight
    must then be zero.
    """
    zero = Tensor(0.0)
    if y1_hat is None and weights.lambda_sales != 0:
        raise ContractError("sales head absent but lambda_sales is nonzero")
    if y2_hat is None and weights.lambda_inventory != 0:
        raise ContractError("inventory head absent but lambda_inventory is nonzero")
    if y1_hat is not None and y2_hat is not None and y1_hat.shape != y2_hat.shape:
        raise DimensionError(f"sales {y1_hat.shape} and inventory {y2_hat.shape} predictions differ in shape")
    l_sales = zero if y1_hat is None else mse(y1_hat, y1)
    l_inv = zero if y2_hat is None else mse(y2_hat, y2)
    total = l_sales * weights.lambda_sales + l_inv * weights.lambda_inventory
    ls, li = l_sales.item(), l_inv.item()
    breakdown = LossBreakdown(
        l_sales=ls,
        l_inventory=li,
        l_total=weights.lambda_sales * ls + weights.lambda_inventory * li,
        weights_used=weights,
    )
    return total, breakdown


def dynamic_task_weights(sales_history: Sequence[float], inventory_history: Sequence[float],
                         temperature: float = 2.0) -> TaskWeights:
    """Weights ``2 * softmax(r / temperature)`` from the last loss ratios.

    ``r_k = L_k(e-1) / L_k(e-2)``; a task whose loss is falling faster gets
    the smaller weight. Fewer than two epochs of history gives ``(1, 1)``.
    """
    if temperature <= 0:
        raise ContractError(f"temperature must be positive, got {temperature}")
    n = min(len(sales_history), len(inventory_history))
    if n < 2:
        return TaskWeights(1.0, 1.0)
    hist = np.array([sales_history[-2:], inventory_history[-2:]], dtype=np.float64)
    if np.any(~np.isfinite(hist)) or np.any(hist <= 0):
        raise ContractError(f"recorded task losses must be positive and finite, got {hist.tolist()}")
    ratios = hist[:, 1] / hist[:, 0]
    z = ratios / temperature
    e = np.exp(z - z.max())
    lam = 2.0 * e / e.sum()
    return TaskWeights(float(lam[0]), float(lam[1]))
