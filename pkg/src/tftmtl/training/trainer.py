"""Mini-batch AdamW training with early stopping on validation loss."""

from __future__ import annotations

import csv
import io
import math
import time
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ..data.windows import WindowSet
from ..errors import TrainingDivergence, ValidationError
from ..model.config import TASKS, ModelConfig, TaskWeights
from ..model.loss import compute_loss, dynamic_task_weights
from ..numerics import AdamWHyper, AdamWState, Tape, Tensor, adamw_step, clip_grad_norm

WEIGHTING_MODES = ("fixed", "dynamic")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 150
    batch_size: int = 64
    learning_rate: float = 5e-4
    patience: int = 15
    seed: int = 0
    weighting_mode: str = "fixed"
    model: ModelConfig = field(default_factory=ModelConfig)
    lambda_sales: float = 1.0
    lambda_inventory: float = 1.0
    clip_norm: float = 1.0
    weight_decay: float = 0.01
    dwa_temperature: float = 2.0
    eval_batch_size: int = 256

    def __post_init__(self) -> None:
        for name in ("epochs", "batch_size", "patience", "eval_batch_size"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")
        if self.patience > self.epochs:
            raise ValidationError(f"patience {self.patience} exceeds epochs {self.epochs}")
        if not self.learning_rate > 0:
            raise ValidationError("learning_rate must be positive")
        if self.weighting_mode not in WEIGHTING_MODES:
            raise ValidationError(f"weighting_mode must be one of {WEIGHTING_MODES}, got {self.weighting_mode!r}")
        TaskWeights(self.lambda_sales, self.lambda_inventory)

    def task_weights(self, tasks: Sequence[str]) -> TaskWeights:
        """Configured weights with absent heads zeroed."""
        ls = self.lambda_sales if "sales" in tasks else 0.0
        li = self.lambda_inventory if "inventory" in tasks else 0.0
        if ls + li == 0:
            ls, li = float("sales" in tasks), float("inventory" in tasks)
        return TaskWeights(ls, li)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["model"] = self.model.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> TrainConfig:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown training options: {sorted(unknown)}")
        kw = dict(d)
        if "model" in kw and isinstance(kw["model"], dict):
            kw["model"] = ModelConfig.from_dict(kw["model"])
        return cls(**kw)


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    train_total: float
    train_sales: float
    train_inventory: float
    val_total: float
    val_sales: float
    val_inventory: float
    lambda_sales: float
    lambda_inventory: float
    wall_seconds: float


LOG_COLUMNS = tuple(f.name for f in fields(EpochLog))


def epoch_log_csv(logs: Sequence[EpochLog]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LOG_COLUMNS)
    for log in logs:
        w.writerow([log.epoch] + [repr(float(getattr(log, c))) for c in LOG_COLUMNS[1:]])
    return buf.getvalue()


def parse_epoch_log(text: str) -> list[EpochLog]:
    """Parse the epoch-log CSV; errors name the 1-based line number."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValidationError("epoch log is empty")
    if tuple(rows[0]) != LOG_COLUMNS:
        raise ValidationError(f"line 1: header {rows[0]} does not match {list(LOG_COLUMNS)}")
    out = []
    for n, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(LOG_COLUMNS):
            raise ValidationError(f"line {n}: expected {len(LOG_COLUMNS)} fields, got {len(row)}")
        try:
            out.append(EpochLog(int(row[0]), *(float(x) for x in row[1:])))
        except ValueError as exc:
            raise ValidationError(f"line {n}: {exc}") from None
    if not out:
        raise ValidationError("epoch log has no data rows")
    return out


@dataclass
class EarlyStopState:
    patience: int
    best_val: float = math.inf
    best_epoch: int = 0
    epochs_since_improve: int = 0

    def update(self, epoch: int, val: float) -> bool:
        """Record one epoch's validation loss; True means improved."""
        if val < self.best_val:
            self.best_val, self.best_epoch, self.epochs_since_improve = val, epoch, 0
            return True
        self.epochs_since_improve += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.epochs_since_improve >= self.patience


@dataclass
class TrainResult:
    best_params: dict[str, Tensor]
    best_optimizer: AdamWState
    best_epoch: int
    best_val: float
    logs: list[EpochLog]
    final_params: dict[str, Tensor]
    stopped_early: bool


def evaluate_loss(model, params, windows: WindowSet, weights: TaskWeights, batch_size: int = 256):
    """Per-task MSE over the whole set (inference mode), as ``(sales, inventory)``."""
    n = len(windows)
    sums = {t: 0.0 for t in TASKS}
    for start in range(0, n, batch_size):
        idx = np.arange(start, min(n, start + batch_size))
        batch = windows.batch(idx)
        out = model.forward(params, batch, training=False)
        for t in model.tasks:
            err = out.predictions[t].data - batch.targets[t]
            sums[t] += float(np.sum(err * err))
    count = n * windows.horizon
    return sums["sales"] / count, sums["inventory"] / count


def predict_windows(model, params, windows: WindowSet, batch_size: int = 256) -> dict[str, np.ndarray]:
    """Denormalized predictions ``[N, T]`` per task of ``model``."""
    outs: dict[str, list[np.ndarray]] = {t: [] for t in model.tasks}
    for start in range(0, len(windows), batch_size):
        idx = np.arange(start, min(len(windows), start + batch_size))
        batch = windows.inputs(idx)
        pred = model.forward(params, batch, training=False).predictions
        for t in model.tasks:
            mu, sd = batch.scales[t]
            outs[t].append(pred[t].data * sd[:, None] + mu[:, None])
    return {t: np.concatenate(v) if v else np.zeros((0, 0)) for t, v in outs.items()}


def _check_finite(value: float, epoch: int, batch: int) -> None:
    if not math.isfinite(value):
        raise TrainingDivergence(epoch, batch, value)


def train(model, params: dict[str, Tensor], train_set: WindowSet, val_set: WindowSet, cfg: TrainConfig,
          clock=time.perf_counter) -> TrainResult:
    """Fit ``params`` and return the checkpoint with the lowest validation loss."""
    if len(train_set) == 0 or len(val_set) == 0:
        raise ValidationError(f"training needs nonempty splits, got {len(train_set)} train / {len(val_set)} val")
    rng = np.random.default_rng(cfg.seed)
    shuffle_rng, dropout_rng = (np.random.default_rng(s) for s in rng.integers(0, 2**63, size=2))
    params = {k: Tensor(v.data, requires_grad=True) for k, v in params.items()}
    names = list(params)
    opt = AdamWState.initial(params, AdamWHyper(lr=cfg.learning_rate, weight_decay=cfg.weight_decay))
    weights = cfg.task_weights(model.tasks)
    dynamic = cfg.weighting_mode == "dynamic" and len(model.tasks) == 2
    stopper = EarlyStopState(cfg.patience)
    history: dict[str, list[float]] = {"sales": [], "inventory": []}
    logs: list[EpochLog] = []
    best = (params, opt)
    stopped = False

    for epoch in range(1, cfg.epochs + 1):
        t0 = clock()
        order = shuffle_rng.permutation(len(train_set))
        sse = {"sales": 0.0, "inventory": 0.0}
        for b, start in enumerate(range(0, len(order), cfg.batch_size), start=1):
            batch = train_set.batch(order[start:start + cfg.batch_size])
            with Tape() as tape:
                out = model.forward(params, batch, training=True, rng=dropout_rng)
                pred = out.predictions
                total, parts = compute_loss(pred.get("sales"), batch.targets["sales"],
                                            pred.get("inventory"), batch.targets["inventory"], weights)
            _check_finite(parts.l_total, epoch, b)
            grads = tape.backward(total, [params[k] for k in names])
            grads, _ = clip_grad_norm(dict(zip(names, grads)), cfg.clip_norm)
            new, opt = adamw_step(params, grads, opt)
            params = {k: Tensor(v.data, requires_grad=True) for k, v in new.items()}
            sse["sales"] += parts.l_sales * len(batch)
            sse["inventory"] += parts.l_inventory * len(batch)
        tr_s, tr_i = sse["sales"] / len(order), sse["inventory"] / len(order)
        va_s, va_i = evaluate_loss(model, params, val_set, weights, cfg.eval_batch_size)
        ls, li = weights.lambda_sales, weights.lambda_inventory
        val_total = ls * va_s + li * va_i
        _check_finite(val_total, epoch, 0)
        logs.append(EpochLog(epoch, ls * tr_s + li * tr_i, tr_s, tr_i, val_total, va_s, va_i, ls, li,
                             clock() - t0))
        if stopper.update(epoch, val_total):
            best = (params, opt)
        history["sales"].append(tr_s)
        history["inventory"].append(tr_i)
        if dynamic:
            weights = dynamic_task_weights(history["sales"], history["inventory"], cfg.dwa_temperature)
        if stopper.should_stop:
            stopped = True
            break

    freeze = lambda p: {k: Tensor(v.data) for k, v in p.items()}
    return TrainResult(freeze(best[0]), best[1], stopper.best_epoch, stopper.best_val, logs, freeze(params),
                       stopped)


def logs_without_timing(logs: Sequence[EpochLog]) -> list[dict]:
    return [{k: v for k, v in asdict(log).items() if k != "wall_seconds"} for log in logs]
