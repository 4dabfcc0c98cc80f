"""The multi-task temporal fusion network.

Pipeline: static embeddings -> static encoder -> per-variable input
embeddings -> variable selection (conditioned on the static context) ->
sinusoidal positions -> GRN -> causal multi-head attention -> residual +
layer norm -> GRN -> last state projected to the horizon -> one linear head
per task.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError
from ..numerics import Tensor, concat, dropout, getitem, layer_norm, reshape, take
from .config import STATIC_FEATURES, ModelConfig
from .layers import (
    Params,
    encode_static,
    grn_forward,
    init_attention,
    init_grn,
    init_linear,
    linear,
    multi_head_attention,
    positional_encoding,
    variable_selection,
)


@dataclass
class Batch:
    """Model input. ``dynamic`` is normalised ``[B, L, V]``; ``static`` holds
    integer codes ``[B, 3]`` in ``STATIC_FEATURES`` order.

    ``targets`` are normalised ``[B, T]`` arrays per task; ``scales`` maps a
    task to per-sample ``(mean, std)`` used to return to original units.
    """

    dynamic: np.ndarray
    static: np.ndarray
    targets: dict[str, np.ndarray] = field(default_factory=dict)
    scales: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def __len__(self) -> int:
        return self.dynamic.shape[0]


@dataclass
class ForwardTrace:
    attention_weights: np.ndarray  # [B, heads, L, L]
    variable_weights: np.ndarray  # [B, L, V]


@dataclass
class ModelOutput:
    predictions: dict[str, Tensor]  # normalised [B, T] per task
    trace: ForwardTrace | None = None


@dataclass
class ForecastOutput:
    sales: np.ndarray | None
    inventory: np.ndarray | None
    trace: ForwardTrace | None
    denormalized: bool

    def get(self, task: str) -> np.ndarray | None:
        return self.sales if task == "sales" else self.inventory


def init_tft_params(config: ModelConfig, seed: int) -> dict[str, Tensor]:
    rng = np.random.default_rng(seed)
    h, v, e = config.hidden_dim, config.num_dynamic_vars, config.static_embed_dim
    p: dict[str, Tensor] = {}
    for feat in STATIC_FEATURES:
        p[f"static.embed.{feat}"] = Tensor(rng.uniform(-1.0, 1.0, (config.static_vocab_sizes[feat], e)))
    init_linear(p, rng, "static.encoder", len(STATIC_FEATURES) * e, h)
    p["vsn.input.w"] = Tensor(rng.uniform(-1.0, 1.0, (v, h)))
    p["vsn.input.b"] = Tensor(np.zeros((v, h)))
    init_grn(p, rng, "vsn.score", v * h + h, v, d_hidden=h)
    init_grn(p, rng, "vsn.var", h, h, stack=v)
    init_grn(p, rng, "encoder.grn_in", h, h)
    init_attention(p, rng, "attn", h)
    p["encoder.attn_ln.g"] = Tensor(np.ones(h))
    p["encoder.attn_ln.b"] = Tensor(np.zeros(h))
    init_grn(p, rng, "encoder.grn_out", h, h)
    init_linear(p, rng, "decoder", h, config.horizon * h)
    for task in config.tasks:
        init_linear(p, rng, f"head.{task}", h, 1)
    return p


def check_batch(batch: Batch, config: ModelConfig) -> None:
    dyn = batch.dynamic
    if dyn.ndim != 3:
        raise DimensionError(f"dynamic inputs must be [B, L, V], got shape {dyn.shape}")
    if dyn.shape[2] != config.num_dynamic_vars:
        raise DimensionError(
            f"model expects {config.num_dynamic_vars} dynamic variables, batch provides {dyn.shape[2]}"
        )
    if dyn.shape[1] != config.lookback:
        raise DimensionError(f"model expects lookback {config.lookback}, batch provides {dyn.shape[1]}")
    if batch.static.shape != (dyn.shape[0], len(STATIC_FEATURES)):
        raise DimensionError(f"static codes must be [B, {len(STATIC_FEATURES)}], got {batch.static.shape}")


def static_context(batch: Batch, params: Params) -> Tensor:
    codes = np.asarray(batch.static, dtype=np.int64)
    pieces = [take(params[f"static.embed.{f}"], codes[:, i]) for i, f in enumerate(STATIC_FEATURES)]
    return encode_static(concat(pieces, axis=-1), params)


def tft_encoder_forward(batch: Batch, params: Params, config: ModelConfig, *, training: bool = False,
                        rng: np.random.Generator | None = None):
    """Returns ``(h_seq [B, L, H], ForwardTrace)``."""
    check_batch(batch, config)
    b, steps, n_vars = batch.dynamic.shape
    rate = config.dropout_rate
    kw = dict(dropout_rate=rate, rng=rng, training=training)

    h_s = static_context(batch, params)
    x = reshape(Tensor(batch.dynamic), (b, steps, n_vars, 1))
    var_emb = x * params["vsn.input.w"] + params["vsn.input.b"]
    combined, var_weights = variable_selection(var_emb, h_s, params, **kw)

    seq = combined + Tensor(positional_encoding(steps, config.hidden_dim))
    seq = grn_forward(seq, params, "encoder.grn_in", **kw)
    attended, attn_weights = multi_head_attention(seq, seq, seq, params, config.num_heads)
    attended = dropout(attended, rate, rng, training)
    seq = layer_norm(seq + attended, params["encoder.attn_ln.g"], params["encoder.attn_ln.b"])
    h_seq = grn_forward(seq, params, "encoder.grn_out", **kw)
    return h_seq, ForwardTrace(attn_weights.data, var_weights.data)


def predict_heads(h_seq: Tensor, params: Params, horizon: int, tasks=("sales", "inventory")) -> dict[str, Tensor]:
    """Project the last encoder state to ``horizon`` positions, then apply each head."""
    if horizon < 1:
        raise DimensionError(f"horizon must be >= 1, got {horizon}")
    b, _, hidden = h_seq.shape
    dec = params["decoder.w"]
    if dec.shape != (hidden, horizon * hidden):
        raise DimensionError(f"decoder weight {dec.shape} does not map {hidden} -> {horizon} x {hidden}")
    last = getitem(h_seq, (slice(None), -1, slice(None)))
    positions = reshape(linear(last, params, "decoder"), (b, horizon, hidden))
    return {task: reshape(linear(positions, params, f"head.{task}"), (b, horizon)) for task in tasks}


class TFTMultiTask:
    """Shared encoder with one linear head per configured task."""

    kind = "tft"

    def __init__(self, config: ModelConfig):
        self.config = config

    @property
    def tasks(self) -> tuple[str, ...]:
        return self.config.tasks

    def init_params(self, seed: int) -> dict[str, Tensor]:
        return init_tft_params(self.config, seed)

    def forward(self, params: Params, batch: Batch, *, training: bool = False,
                rng: np.random.Generator | None = None) -> ModelOutput:
        h_seq, trace = tft_encoder_forward(batch, params, self.config, training=training, rng=rng)
        return ModelOutput(predict_heads(h_seq, params, self.config.horizon, self.tasks), trace)


def denormalize_outputs(out: ModelOutput, batch: Batch, tasks) -> ForecastOutput:
    arrays: dict[str, np.ndarray | None] = {"sales": None, "inventory": None}
    scaled = all(t in batch.scales for t in tasks)
    for task in tasks:
        pred = out.predictions[task].data
        if scaled:
            mu, sd = batch.scales[task]
            pred = pred * sd[:, None] + mu[:, None]
        arrays[task] = pred
    return ForecastOutput(arrays["sales"], arrays["inventory"], out.trace, scaled)


def model_forward(batch: Batch, params: Params, config: ModelConfig) -> ForecastOutput:
    """Inference pass; predictions are in original units when the batch carries scales."""
    model = TFTMultiTask(config)
    return denormalize_outputs(model.forward(params, batch), batch, model.tasks)
