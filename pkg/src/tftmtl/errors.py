"""Exception hierarchy shared across the package."""


class TFTMTLError(Exception):
    """Base class for all package errors."""


class DimensionError(TFTMTLError, ValueError):
    """Raised when tensor or array shapes do not line up."""


class ContractError(TFTMTLError, ValueError):
    """Raised when a caller violates an operation's precondition."""


class ValidationError(TFTMTLError, ValueError):
    """Raised for invalid configuration or insufficient data."""


class UndefinedMetricError(TFTMTLError, ValueError):
    """Raised when a metric is mathematically undefined for the input."""


class CheckpointError(TFTMTLError):
    """Raised when a checkpoint file cannot be read back."""


class TrainingDivergence(TFTMTLError, FloatingPointError):
    """Raised when the training loss becomes NaN or infinite."""

    def __init__(self, epoch: int, batch: int, value: float):
        self.epoch = epoch
        self.batch = batch
        self.value = value
        super().__init__(
            f"training diverged at epoch {epoch}, batch {batch}: loss={value!r}"
        )
