"""Building blocks of the temporal fusion encoder.

Every layer is a pure function of its inputs and a flat ``{name: Tensor}``
parameter map; ``prefix`` selects the layer's entries. Row-vector
convention throughout: ``y = x @ W + b`` with ``W`` of shape ``[in, out]``.
"""

from __future__ import annotations

import math
from collections.abc import Mapping

import numpy as np

from ..errors import DimensionError
from ..numerics import (
    Tensor,
    broadcast_to,
    concat,
    dropout,
    layer_norm,
    matmul,
    relu,
    reshape,
    sigmoid,
    softmax,
    sum_,
    transpose,
)

Params = Mapping[str, Tensor]


def uniform_init(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_linear(params: dict, rng, prefix: str, d_in: int, d_out: int, bias: bool = True, stack: int | None = None):
    lead = () if stack is None else (stack,)
    params[f"{prefix}.w"] = Tensor(uniform_init(rng, d_in, lead + (d_in, d_out)))
    if bias:
        params[f"{prefix}.b"] = Tensor(np.zeros(lead + ((1,) if stack else ()) + (d_out,)))


def init_grn(params: dict, rng, prefix: str, d_in: int, d_out: int, d_hidden: int | None = None,
             stack: int | None = None) -> None:
    """Parameters for ``LayerNorm(skip(x) + GLU(x @ W_t))``.

    ``stack`` creates ``stack`` independent copies along a leading axis
    (one per input variable).
    """
    d_hidden = d_hidden or d_out
    lead = () if stack is None else (stack,)
    row = lead + ((1,) if stack else ())
    params[f"{prefix}.w_t"] = Tensor(uniform_init(rng, d_in, lead + (d_in, d_hidden)))
    params[f"{prefix}.w_v"] = Tensor(uniform_init(rng, d_hidden, lead + (d_hidden, d_out)))
    params[f"{prefix}.b_v"] = Tensor(np.zeros(row + (d_out,)))
    params[f"{prefix}.w_g"] = Tensor(uniform_init(rng, d_hidden, lead + (d_hidden, d_out)))
    params[f"{prefix}.b_g"] = Tensor(np.zeros(row + (d_out,)))
    if d_in != d_out:
        params[f"{prefix}.w_skip"] = Tensor(uniform_init(rng, d_in, lead + (d_in, d_out)))
    params[f"{prefix}.ln_g"] = Tensor(np.ones(row + (d_out,)))
    params[f"{prefix}.ln_b"] = Tensor(np.zeros(row + (d_out,)))


def linear(x: Tensor, params: Params, prefix: str) -> Tensor:
    w = params[f"{prefix}.w"]
    if x.shape[-1] != w.shape[-2]:
        raise DimensionError(f"{prefix}: input width {x.shape[-1]} does not match weight {w.shape}")
    vector = x.ndim == 1
    out = matmul(reshape(x, (1, -1)) if vector else x, w)
    b = params.get(f"{prefix}.b")
    out = out if b is None else out + b
    return reshape(out, (-1,)) if vector else out


def encode_static(x_s: Tensor, params: Params, prefix: str = "static.encoder") -> Tensor:
    """``ReLU(x_s W_s + b_s)`` on the concatenated static embeddings."""
    w = params[f"{prefix}.w"]
    if x_s.shape[-1] != w.shape[0]:
        raise DimensionError(
            f"static input width {x_s.shape[-1]} does not match encoder width {w.shape[0]}"
        )
    return relu(linear(x_s, params, prefix))


def glu(a: Tensor, params: Params, prefix: str) -> Tensor:
    value = matmul(a, params[f"{prefix}.w_v"]) + params[f"{prefix}.b_v"]
    gate = sigmoid(matmul(a, params[f"{prefix}.w_g"]) + params[f"{prefix}.b_g"])
    return value * gate


def grn_forward(x: Tensor, params: Params, prefix: str, *, dropout_rate: float = 0.0,
                rng: np.random.Generator | None = None, training: bool = False) -> Tensor:
    w_t = params[f"{prefix}.w_t"]
    if x.shape[-1] != w_t.shape[-2]:
        raise DimensionError(f"{prefix}: input last axis {x.shape[-1]} does not match {w_t.shape[-2]}")
    gated = glu(matmul(x, w_t), params, prefix)
    gated = dropout(gated, dropout_rate, rng, training)
    w_skip = params.get(f"{prefix}.w_skip")
    skip = x if w_skip is None else matmul(x, w_skip)
    return layer_norm(skip + gated, params[f"{prefix}.ln_g"], params[f"{prefix}.ln_b"])


def variable_selection(var_embeddings: Tensor, static_context: Tensor, params: Params,
                       prefix: str = "vsn", *, dropout_rate: float = 0.0,
                       rng: np.random.Generator | None = None, training: bool = False):
    """Softmax-weighted fusion of per-variable representations.

    ``var_embeddings`` is ``[B, L, V, H]`` and ``static_context`` ``[B, H]``.
    Returns ``(combined [B, L, H], weights [B, L, V])``.
    """
    if var_embeddings.ndim != 4:
        raise DimensionError(f"variable embeddings must be [B, L, V, H], got {var_embeddings.shape}")
    b, steps, n_vars, hidden = var_embeddings.shape
    if static_context.shape != (b, hidden):
        raise DimensionError(
            f"static context {static_context.shape} does not match embeddings {var_embeddings.shape}"
        )
    flat = reshape(var_embeddings, (b, steps, n_vars * hidden))
    ctx = broadcast_to(reshape(static_context, (b, 1, hidden)), (b, steps, hidden))
    logits = grn_forward(concat([flat, ctx], axis=-1), params, f"{prefix}.score",
                         dropout_rate=dropout_rate, rng=rng, training=training)
    weights = softmax(logits, axis=-1)

    per_var = reshape(transpose(var_embeddings, (2, 0, 1, 3)), (n_vars, b * steps, hidden))
    processed = grn_forward(per_var, params, f"{prefix}.var",
                            dropout_rate=dropout_rate, rng=rng, training=training)
    processed = transpose(reshape(processed, (n_vars, b, steps, hidden)), (1, 2, 0, 3))
    combined = sum_(processed * reshape(weights, (b, steps, n_vars, 1)), axis=2)
    return combined, weights


def positional_encoding(length: int, dim: int) -> np.ndarray:
    pos = np.arange(length, dtype=np.float64)[:, None]
    i = np.arange(dim, dtype=np.float64)[None, :]
    angle = pos / np.power(10000.0, (2.0 * np.floor(i / 2.0)) / dim)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


def causal_mask(length: int) -> np.ndarray:
    return np.tril(np.ones((length, length), dtype=bool))


def init_attention(params: dict, rng, prefix: str, hidden: int) -> None:
    for name in ("w_q", "w_k", "w_v", "w_o"):
        params[f"{prefix}.{name}"] = Tensor(uniform_init(rng, hidden, (hidden, hidden)))
    params[f"{prefix}.b_o"] = Tensor(np.zeros(hidden))


def multi_head_attention(q_in: Tensor, k_in: Tensor, v_in: Tensor, params: Params, num_heads: int,
                         prefix: str = "attn", *, causal: bool = True):
    """Scaled dot-product attention per head, heads concatenated then projected.

    Inputs are ``[B, L, H]``. Returns ``(fused [B, L, H], weights [B, heads, L, L])``.
    """
    if q_in.ndim != 3 or q_in.shape != k_in.shape or k_in.shape != v_in.shape:
        raise DimensionError(f"attention inputs must share shape [B, L, H]: {q_in.shape}, {k_in.shape}, {v_in.shape}")
    b, steps, hidden = q_in.shape
    if hidden % num_heads:
        raise DimensionError(f"hidden size {hidden} is not divisible by {num_heads} heads")
    d_k = hidden // num_heads

    def split(x: Tensor, name: str) -> Tensor:
        proj = matmul(x, params[f"{prefix}.{name}"])
        return transpose(reshape(proj, (b, steps, num_heads, d_k)), (0, 2, 1, 3))

    q, k, v = split(q_in, "w_q"), split(k_in, "w_k"), split(v_in, "w_v")
    scores = matmul(q, transpose(k, (0, 1, 3, 2))) * (1.0 / math.sqrt(d_k))
    weights = softmax(scores, axis=-1, mask=causal_mask(steps) if causal else None)
    heads = transpose(matmul(weights, v), (0, 2, 1, 3))
    fused = matmul(reshape(heads, (b, steps, hidden)), params[f"{prefix}.w_o"]) + params[f"{prefix}.b_o"]
    return fused, weights
