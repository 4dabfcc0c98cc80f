"""Single-layer GRU baseline sharing the static embedding pipeline."""

from __future__ import annotations

import numpy as np

from ..model.config import STATIC_FEATURES, ModelConfig
from ..model.layers import init_linear, linear, uniform_init
from ..model.tft import Batch, ModelOutput, check_batch, static_context
from ..numerics import Tensor, matmul, sigmoid, tanh

Params = dict[str, Tensor]


def init_gru_params(config: ModelConfig, seed: int) -> Params:
    rng = np.random.default_rng(seed)
    h, v, e = config.hidden_dim, config.num_dynamic_vars, config.static_embed_dim
    p: Params = {}
    for feat in STATIC_FEATURES:
        p[f"static.embed.{feat}"] = Tensor(rng.uniform(-1.0, 1.0, (config.static_vocab_sizes[feat], e)))
    init_linear(p, rng, "static.encoder", len(STATIC_FEATURES) * e, h)
    for gate in ("z", "r", "n"):
        p[f"gru.w_{gate}"] = Tensor(uniform_init(rng, v, (v, h)))
        p[f"gru.u_{gate}"] = Tensor(uniform_init(rng, h, (h, h)))
        p[f"gru.b_{gate}"] = Tensor(np.zeros(h))
    init_linear(p, rng, "gru.out", h, 2 * config.horizon)
    return p


def gru_encode(batch: Batch, params: Params, config: ModelConfig) -> tuple[Tensor, list[Tensor]]:
    """Run the recurrence; the static context is the initial state. Returns (h_L, states)."""
    check_batch(batch, config)
    h = static_context(batch, params)
    x = Tensor(np.asarray(batch.dynamic, dtype=np.float64))
    states = [h]
    for t in range(config.lookback):
        xt = x[:, t, :]
        z = sigmoid(matmul(xt, params["gru.w_z"]) + matmul(h, params["gru.u_z"]) + params["gru.b_z"])
        r = sigmoid(matmul(xt, params["gru.w_r"]) + matmul(h, params["gru.u_r"]) + params["gru.b_r"])
        n = tanh(matmul(xt, params["gru.w_n"]) + params["gru.b_n"] + r * matmul(h, params["gru.u_n"]))
        h = (1.0 - z) * n + z * h
        states.append(h)
    return h, states


def gru_baseline_forward(batch: Batch, params: Params, config: ModelConfig) -> tuple[Tensor, Tensor]:
    """Final hidden state through one linear map to ``2 * horizon`` outputs."""
    h, _ = gru_encode(batch, params, config)
    out = linear(h, params, "gru.out")
    T = config.horizon
    return out[:, :T], out[:, T:]


class GRUBaseline:
    kind = "gru"
    tasks = ("sales", "inventory")

    def __init__(self, config: ModelConfig):
        self.config = config

    def init_params(self, seed: int) -> Params:
        return init_gru_params(self.config, seed)

    def forward(self, params: Params, batch: Batch, *, training: bool = False,
                rng: np.random.Generator | None = None) -> ModelOutput:
        y1, y2 = gru_baseline_forward(batch, params, self.config)
        return ModelOutput({"sales": y1, "inventory": y2}, None)
