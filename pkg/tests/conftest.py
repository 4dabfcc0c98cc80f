import numpy as np
import pytest

from tftmtl.model import Batch, ModelConfig

VOCAB = {"product_id": 4, "category": 3, "brand": 3}


def toy_config(**overrides) -> ModelConfig:
    base = dict(hidden_dim=8, num_heads=2, lookback=4, horizon=2, num_dynamic_vars=9,
                static_vocab_sizes=VOCAB, static_embed_dim=4, dropout_rate=0.0)
    base.update(overrides)
    return ModelConfig(**base)


def random_batch(config: ModelConfig, size: int = 2, seed: int = 0, with_targets: bool = True) -> Batch:
    rng = np.random.default_rng(seed)
    dyn = rng.normal(size=(size, config.lookback, config.num_dynamic_vars))
    static = np.stack([rng.integers(0, config.static_vocab_sizes[f], size)
                       for f in ("product_id", "category", "brand")], axis=1)
    batch = Batch(dyn, static)
    if with_targets:
        batch.targets = {t: rng.normal(size=(size, config.horizon)) for t in ("sales", "inventory")}
    return batch


@pytest.fixture
def toy():
    return toy_config()


def random_point(params, seed: int = 0, scale: float = 0.3):
    """Perturb every parameter (biases included) away from the structured init.

    At init the zero biases make each variable embedding rank one, which
    leaves some gradient coordinates near 1e-9: below what central
    differences can resolve in float64.
    """
    from tftmtl.numerics import Tensor

    rng = np.random.default_rng(seed)
    return {k: Tensor(v.data + rng.normal(scale=scale, size=v.shape)) for k, v in params.items()}


# criterion number -> "PASS ..." / "FAIL ..." line, filled by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
