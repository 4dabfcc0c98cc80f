"""Central finite-difference checks against tape gradients."""

from __future__ import annotations

from collections.abc import Callable, Mapping
from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from .tensor import Tape, Tensor, getitem, reshape


@dataclass
class GradCheckResult:
    analytic: np.ndarray
    numeric: np.ndarray

    @property
    def relative_errors(self) -> np.ndarray:
        diff = np.abs(self.analytic - self.numeric)
        return diff / np.maximum(1e-12, np.abs(self.analytic) + np.abs(self.numeric))

    @property
    def max_relative_error(self) -> float:
        return float(self.relative_errors.max()) if self.analytic.size else 0.0


def compare_gradients(f: Callable[[Tensor], Tensor], x, eps: float = 1e-6) -> GradCheckResult:
    """Analytic gradient of scalar ``f`` at ``x`` next to its central differences."""
    if eps <= 0:
        raise ContractError(f"eps must be positive, got {eps}")
    x = np.array(x, dtype=np.float64).reshape(-1)
    leaf = Tensor(x, requires_grad=True)
    with Tape() as tape:
        out = f(leaf)
    (analytic,) = tape.backward(out, [leaf], accumulate=False)
    numeric = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xp[i] += eps
        xm = x.copy()
        xm[i] -= eps
        numeric[i] = (f(Tensor(xp)).item() - f(Tensor(xm)).item()) / (2.0 * eps)
    return GradCheckResult(np.asarray(analytic, dtype=np.float64).reshape(-1), numeric)


def finite_diff_check(f: Callable[[Tensor], Tensor], x, eps: float = 1e-6) -> float:
    """Max over coordinates of ``|a - c| / max(1e-12, |a| + |c|)``."""
    return compare_gradients(f, x, eps).max_relative_error


def flatten_params(params: Mapping[str, Tensor]) -> np.ndarray:
    if not params:
        return np.zeros(0)
    return np.concatenate([p.data.reshape(-1) for p in params.values()])


def unflatten_params(vec: Tensor, template: Mapping[str, Tensor]) -> dict[str, Tensor]:
    """Slice a flat vector back into named tensors; slicing is taped."""
    out: dict[str, Tensor] = {}
    offset = 0
    for name, p in template.items():
        n = p.size
        out[name] = reshape(getitem(vec, slice(offset, offset + n)), p.shape)
        offset += n
    if offset != vec.size:
        raise ContractError(f"vector has {vec.size} entries, parameters need {offset}")
    return out
