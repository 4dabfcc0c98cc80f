import copy
import dataclasses

import numpy as np
import pytest

from tftmtl.data import GeneratorConfig, generate_synthetic
from tftmtl.errors import CheckpointError, DimensionError, TrainingDivergence, ValidationError
from tftmtl.model import ModelConfig, TaskWeights, TFTMultiTask, compute_loss
from tftmtl.numerics import Tensor, finite_diff_check, flatten_params, unflatten_params
from tftmtl.training import (
    Checkpoint,
    EarlyStopState,
    ExperimentConfig,
    GRUBaseline,
    TrainConfig,
    checkpoint_from_json,
    checkpoint_to_json,
    epoch_log_csv,
    evaluate_loss,
    fit,
    gru_baseline_forward,
    gru_encode,
    load_checkpoint,
    logs_without_timing,
    parse_epoch_log,
    predict_windows,
    prepare,
    run_ablation,
    save_checkpoint,
    train,
)
from tftmtl.training import trainer as trainer_mod

from conftest import random_batch, random_point, toy_config

TINY_MODEL = ModelConfig(hidden_dim=8, num_heads=2, lookback=7, horizon=3, static_embed_dim=4, dropout_rate=0.0)


def tiny_experiment(**train_kw) -> ExperimentConfig:
    kw = dict(epochs=3, batch_size=32, learning_rate=3e-3, patience=3, seed=1, model=TINY_MODEL)
    kw.update(train_kw)
    return ExperimentConfig(generator=GeneratorConfig(num_products=2, num_days=120, seed=4),
                            train=TrainConfig(**kw), test_months=1, val_months=1)


@pytest.fixture(scope="module")
def prep():
    cfg = tiny_experiment()
    return prepare(generate_synthetic(cfg.generator).records, cfg)


@pytest.fixture(scope="module")
def fitted(prep):
    cfg = tiny_experiment().train
    return fit(prep, cfg)


class TestTrainConfig:
    def test_defaults(self):
        c = TrainConfig()
        assert (c.epochs, c.batch_size, c.learning_rate, c.patience) == (150, 64, 5e-4, 15)

    @pytest.mark.parametrize("kw", [dict(patience=20, epochs=10), dict(batch_size=0),
                                    dict(weighting_mode="magic"), dict(learning_rate=0.0)])
    def test_invalid(self, kw):
        with pytest.raises(ValidationError):
            TrainConfig(**kw)

    def test_single_task_weights(self):
        assert TrainConfig().task_weights(("sales",)) == TaskWeights(1.0, 0.0)
        assert TrainConfig(lambda_sales=0.0).task_weights(("sales",)) == TaskWeights(1.0, 0.0)

    def test_dict_round_trip(self):
        c = TrainConfig(seed=3, model=TINY_MODEL)
        assert TrainConfig.from_dict(c.to_dict()) == c


class TestEarlyStopping:
    def test_rising_after_first_epoch(self):
        s = EarlyStopState(patience=1)
        assert s.update(1, 1.0) and not s.should_stop
        assert not s.update(2, 1.5) and s.should_stop
        assert s.best_epoch == 1 and s.best_val == 1.0

    def test_train_stops_on_rising_validation(self, prep, monkeypatch):
        calls = iter(range(1, 100))
        monkeypatch.setattr(trainer_mod, "evaluate_loss", lambda *a, **k: (float(next(calls)), 0.0))
        cfg = tiny_experiment(epochs=10, patience=1).train
        model = TFTMultiTask(prep.model_config)
        res = train(model, model.init_params(0), prep.train, prep.val, cfg)
        assert len(res.logs) == 2 and res.best_epoch == 1 and res.stopped_early

    def test_returns_minimum_validation_checkpoint(self, prep, fitted):
        model, res, _ = fitted
        assert res.best_val == min(log.val_total for log in res.logs)
        s, i = evaluate_loss(model, res.best_params, prep.val, TaskWeights())
        assert s + i == pytest.approx(res.best_val, rel=1e-12)


class TestTrainLoop:
    def test_eq6_identity_in_logs(self, fitted):
        for log in fitted[1].logs:
            assert log.train_total == log.lambda_sales * log.train_sales + log.lambda_inventory * log.train_inventory
            assert log.val_total == log.lambda_sales * log.val_sales + log.lambda_inventory * log.val_inventory

    def test_deterministic(self, prep, fitted):
        _, again, _ = fit(prep, tiny_experiment().train)
        assert logs_without_timing(again.logs) == logs_without_timing(fitted[1].logs)
        for k, v in fitted[1].best_params.items():
            np.testing.assert_array_equal(v.data, again.best_params[k].data)

    def test_loss_decreases(self, fitted):
        logs = fitted[1].logs
        assert logs[-1].train_total < logs[0].train_total

    def test_dynamic_weighting_updates_lambdas(self, prep):
        _, res, _ = fit(prep, tiny_experiment(weighting_mode="dynamic", epochs=4, patience=4).train)
        lams = [(log.lambda_sales, log.lambda_inventory) for log in res.logs]
        assert lams[0] == lams[1] == (1.0, 1.0)
        assert lams[2] != (1.0, 1.0)
        assert all(abs(a + b - 2.0) < 1e-12 for a, b in lams)

    def test_divergence_names_epoch_and_batch(self, prep):
        poisoned = dataclasses.replace(prep)
        bad = copy.copy(prep.train)
        bad.targets = {k: v.copy() for k, v in prep.train.targets.items()}
        bad.targets["sales"][:] = np.nan
        poisoned.train = bad
        with pytest.raises(TrainingDivergence, match="epoch 1, batch 1"):
            fit(poisoned, tiny_experiment().train)

    def test_empty_split_rejected(self, prep):
        model = TFTMultiTask(prep.model_config)
        empty = type(prep.val)([], prep.normalizer)
        with pytest.raises(ValidationError):
            train(model, model.init_params(0), prep.train, empty, tiny_experiment().train)

    def test_memorizes_small_set(self, prep):
        small = type(prep.train)(prep.train.samples[:8], prep.normalizer)
        cfg = tiny_experiment(epochs=150, patience=150, batch_size=4, learning_rate=5e-3).train
        model = TFTMultiTask(prep.model_config)
        res = train(model, model.init_params(0), small, small, cfg)
        assert res.logs[-1].train_total < 0.05 * res.logs[0].train_total


class TestEpochLogCsv:
    def test_round_trip(self, fitted):
        logs = fitted[1].logs
        assert parse_epoch_log(epoch_log_csv(logs)) == logs

    def test_malformed_line_number(self, fitted):
        lines = epoch_log_csv(fitted[1].logs).splitlines()
        lines[2] = "2,abc"
        with pytest.raises(ValidationError, match="line 3"):
            parse_epoch_log("\n".join(lines))

    def test_empty(self):
        with pytest.raises(ValidationError):
            parse_epoch_log("")


class TestCheckpoint:
    def test_save_load_save_identical(self, fitted, tmp_path):
        ckpt = fitted[2]
        save_checkpoint(ckpt, tmp_path / "a.json")
        save_checkpoint(load_checkpoint(tmp_path / "a.json"), tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_bit_lossless(self, fitted, tmp_path):
        ckpt = fitted[2]
        save_checkpoint(ckpt, tmp_path / "c.json")
        back = load_checkpoint(tmp_path / "c.json")
        for k, p in ckpt.params.items():
            assert p.data.tobytes() == back.params[k].data.tobytes()
        for k in ckpt.optimizer.m:
            assert ckpt.optimizer.m[k].tobytes() == back.optimizer.m[k].tobytes()
            assert ckpt.optimizer.v[k].tobytes() == back.optimizer.v[k].tobytes()
        assert back.optimizer.step == ckpt.optimizer.step and back.epoch == ckpt.epoch
        for p in ckpt.normalizer.mean:
            assert back.normalizer.mean[p].tobytes() == ckpt.normalizer.mean[p].tobytes()
        assert back.model_config == ckpt.model_config and back.encoder == ckpt.encoder

    def test_predictions_survive_round_trip(self, prep, fitted):
        model, _, ckpt = fitted
        back = checkpoint_from_json(checkpoint_to_json(ckpt))
        a = predict_windows(model, ckpt.params, prep.test)
        b = predict_windows(TFTMultiTask(back.model_config), back.params, prep.test)
        for t in a:
            np.testing.assert_array_equal(a[t], b[t])

    def test_truncated(self, fitted, tmp_path):
        text = checkpoint_to_json(fitted[2])
        (tmp_path / "t.json").write_text(text[: len(text) // 2])
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "t.json")

    def test_version_mismatch(self, fitted):
        text = checkpoint_to_json(fitted[2]).replace('"version":1', '"version":99')
        with pytest.raises(CheckpointError, match="version"):
            checkpoint_from_json(text)

    @pytest.mark.parametrize("text", ["[]", '{"format":"tftmtl-checkpoint","version":1}', "\x00\x01"])
    def test_corrupt(self, text):
        with pytest.raises(CheckpointError):
            checkpoint_from_json(text)

    def test_bad_payload(self, fitted):
        ckpt = fitted[2]
        name = sorted(ckpt.params)[0]
        broken = Checkpoint(**{**ckpt.__dict__, "params": {**ckpt.params, name: Tensor(np.zeros(3))}})
        text = checkpoint_to_json(broken).replace('"shape":[3]', '"shape":[4]', 1)
        with pytest.raises(CheckpointError):
            checkpoint_from_json(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "nope.json")


class TestGRU:
    def test_zero_weights_give_biases(self, toy):
        model = GRUBaseline(toy)
        params = {k: Tensor(np.zeros_like(v.data)) for k, v in model.init_params(0).items()}
        params["gru.out.b"] = Tensor(np.arange(2 * toy.horizon, dtype=float))
        y1, y2 = gru_baseline_forward(random_batch(toy, 3), params, toy)
        np.testing.assert_array_equal(y1.data, np.tile([0.0, 1.0], (3, 1)))
        np.testing.assert_array_equal(y2.data, np.tile([2.0, 3.0], (3, 1)))

    def test_update_gate_one_freezes_state(self, toy):
        model = GRUBaseline(toy)
        params = model.init_params(0)
        params["gru.w_z"] = Tensor(np.zeros_like(params["gru.w_z"].data))
        params["gru.u_z"] = Tensor(np.zeros_like(params["gru.u_z"].data))
        params["gru.b_z"] = Tensor(np.full(toy.hidden_dim, 800.0))  # sigmoid(800) == 1.0
        params["static.encoder.b"] = Tensor(np.full(toy.hidden_dim, 0.3))
        _, states = gru_encode(random_batch(toy, 2), params, toy)
        for h in states[1:]:
            np.testing.assert_array_equal(h.data, states[0].data)
        assert np.any(states[0].data != 0)

    def test_gradient_matches_finite_differences(self, toy):
        model = GRUBaseline(toy)
        params = random_point(model.init_params(1), seed=2)
        batch = random_batch(toy, 2, seed=3)
        names = list(params)
        vec = flatten_params(params)

        def f(v):
            p = unflatten_params(v, params)
            out = model.forward(p, batch).predictions
            return compute_loss(out["sales"], batch.targets["sales"], out["inventory"],
                                batch.targets["inventory"], TaskWeights())[0]

        assert finite_diff_check(f, vec, eps=1e-5) <= 1e-4
        assert names == list(params)

    def test_dimension_error(self, toy):
        model = GRUBaseline(toy)
        bad = random_batch(toy_config(num_dynamic_vars=5), 2)
        with pytest.raises(DimensionError, match="expects 9 dynamic variables, batch provides 5"):
            model.forward(model.init_params(0), bad)


class TestAblation:
    def test_four_models_shared_windows(self, prep):
        res = run_ablation(prep, tiny_experiment(epochs=2, patience=2).train)
        assert list(res.reports) == ["TFT-MTL", "TFT single-task (sales)", "TFT single-task (inventory)", "GRU"]
        assert len({tuple(sorted(c.items())) for c in res.checksums.values()}) == 1
        assert res.reports["TFT single-task (sales)"].get("inventory") is None
        assert res.reports["TFT single-task (inventory)"].get("sales") is None
        assert set(res.deltas()) == {"sales_rmse", "sales_mape", "inventory_rmse", "inventory_mape"}
        text, _ = res.table()
        assert len(text.splitlines()) == 2 + 4
