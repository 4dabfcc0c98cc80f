from __future__ import annotations

from dataclasses import asdict, dataclass, field

from ..errors import ValidationError

TASKS = ("sales", "inventory")
STATIC_FEATURES = ("product_id", "category", "brand")


@dataclass(frozen=True)
class ModelConfig:
    """Network dimensions. ``static_vocab_sizes`` counts include the unknown slot 0."""

    hidden_dim: int = 128
    num_heads: int = 4
    lookback: int = 28
    horizon: int = 14
    num_dynamic_vars: int = 9
    static_vocab_sizes: dict[str, int] = field(
        default_factory=lambda: {"product_id": 2, "category": 2, "brand": 2}
    )
    static_embed_dim: int = 8
    dropout_rate: float = 0.1
    tasks: tuple[str, ...] = TASKS

    def __post_init__(self) -> None:
        for name in ("hidden_dim", "num_heads", "lookback", "horizon", "num_dynamic_vars", "static_embed_dim"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValidationError(f"{name} must be a positive integer, got {value!r}")
        if self.hidden_dim % self.num_heads:
            raise ValidationError(
                f"hidden_dim {self.hidden_dim} is not divisible by num_heads {self.num_heads}"
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValidationError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        tasks = tuple(self.tasks)
        if not tasks or any(t not in TASKS for t in tasks) or len(set(tasks)) != len(tasks):
            raise ValidationError(f"tasks must be a non-empty subset of {TASKS}, got {self.tasks!r}")
        object.__setattr__(self, "tasks", tuple(t for t in TASKS if t in tasks))
        vocab = dict(self.static_vocab_sizes)
        if any(k not in vocab for k in STATIC_FEATURES) or any(v < 1 for v in vocab.values()):
            raise ValidationError(f"static_vocab_sizes needs positive counts for {STATIC_FEATURES}")
        object.__setattr__(self, "static_vocab_sizes", {k: int(vocab[k]) for k in STATIC_FEATURES})

    @property
    def d_k(self) -> int:
        return self.hidden_dim // self.num_heads

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tasks"] = list(self.tasks)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ModelConfig:
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        if "tasks" in known:
            known["tasks"] = tuple(known["tasks"])
        return cls(**known)


@dataclass(frozen=True)
class TaskWeights:
    lambda_sales: float = 1.0
    lambda_inventory: float = 1.0

    def __post_init__(self) -> None:
        if self.lambda_sales < 0 or self.lambda_inventory < 0:
            raise ValidationError(f"task weights must be nonnegative: {self}")
        if self.lambda_sales + self.lambda_inventory <= 0:
            raise ValidationError("task weights must not both be zero")

    def for_task(self, task: str) -> float:
        return self.lambda_sales if task == "sales" else self.lambda_inventory
