"""AdamW with decoupled weight decay, plus global-norm gradient clipping."""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError
from .tensor import Tensor


@dataclass(frozen=True)
class AdamWHyper:
    lr: float = 0.0005
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01


@dataclass
class AdamWState:
    hyper: AdamWHyper = field(default_factory=AdamWHyper)
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def initial(cls, params: Mapping[str, Tensor], hyper: AdamWHyper | None = None) -> AdamWState:
        return cls(
            hyper=hyper or AdamWHyper(),
            step=0,
            m={k: np.zeros_like(p.data) for k, p in params.items()},
            v={k: np.zeros_like(p.data) for k, p in params.items()},
        )


def _check_aligned(params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray], state: AdamWState) -> None:
    if set(grads) != set(params):
        missing = sorted(set(params) - set(grads))
        extra = sorted(set(grads) - set(params))
        raise ContractError(f"gradient map misaligned: missing={missing[:5]} unexpected={extra[:5]}")
    for k, p in params.items():
        if np.shape(grads[k]) != p.shape:
            raise ContractError(f"gradient for {k!r} has shape {np.shape(grads[k])}, parameter is {p.shape}")
        if k not in state.m or state.m[k].shape != p.shape:
            raise ContractError(f"optimizer state has no moment buffer matching {k!r}")


def adamw_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray],
    state: AdamWState,
) -> tuple[dict[str, Tensor], AdamWState]:
    """One AdamW update. Returns fresh parameter tensors and a new state."""
    _check_aligned(params, grads, state)
    h = state.hyper
    step = state.step + 1
    bc1 = 1.0 - h.beta1 ** step
    bc2 = 1.0 - h.beta2 ** step
    new_params: dict[str, Tensor] = {}
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    for k, p in params.items():
        g = np.asarray(grads[k], dtype=np.float64)
        m = h.beta1 * state.m[k] + (1.0 - h.beta1) * g
        v = h.beta2 * state.v[k] + (1.0 - h.beta2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        update = m_hat / (np.sqrt(v_hat) + h.eps) + h.weight_decay * p.data
        new_params[k] = Tensor(p.data - h.lr * update, requires_grad=p.requires_grad)
        new_m[k] = m
        new_v[k] = v
    return new_params, AdamWState(hyper=h, step=step, m=new_m, v=new_v)


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.vdot(g, g)) for g in grads.values()))


def clip_grad_norm(grads: Mapping[str, np.ndarray], max_norm: float) -> tuple[dict[str, np.ndarray], float]:
    norm = global_norm(grads)
    if max_norm <= 0 or norm <= max_norm:
        return dict(grads), norm
    scale = max_norm / (norm + 1e-12)
    return {k: g * scale for k, g in grads.items()}, norm
