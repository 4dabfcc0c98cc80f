from .ablation import VARIANTS, AblationResult, run_ablation
from .checkpoint import Checkpoint, checkpoint_from_json, checkpoint_to_json, load_checkpoint, save_checkpoint
from .gru import GRUBaseline, gru_baseline_forward, gru_encode, init_gru_params
from .pipeline import (
    MODEL_KINDS,
    ExperimentConfig,
    Prepared,
    build_model,
    fit,
    model_from_checkpoint,
    prepare,
    windows_for_checkpoint,
)
from .trainer import (
    LOG_COLUMNS,
    EarlyStopState,
    EpochLog,
    TrainConfig,
    TrainResult,
    epoch_log_csv,
    evaluate_loss,
    logs_without_timing,
    parse_epoch_log,
    predict_windows,
    train,
)
