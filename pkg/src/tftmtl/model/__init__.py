from .config import STATIC_FEATURES, TASKS, ModelConfig, TaskWeights
from .layers import (
    causal_mask,
    encode_static,
    grn_forward,
    multi_head_attention,
    positional_encoding,
    variable_selection,
)
from .loss import LossBreakdown, compute_loss, dynamic_task_weights, mse
from .tft import (
    Batch,
    ForecastOutput,
    ForwardTrace,
    ModelOutput,
    TFTMultiTask,
    denormalize_outputs,
    init_tft_params,
    model_forward,
    predict_heads,
    tft_encoder_forward,
)
