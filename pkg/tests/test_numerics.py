import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from tftmtl.errors import ContractError, DimensionError
from tftmtl.numerics import (
    AdamWHyper,
    AdamWState,
    Tape,
    Tensor,
    adamw_step,
    clip_grad_norm,
    compare_gradients,
    concat,
    dropout,
    finite_diff_check,
    layer_norm,
    matmul,
    relu,
    sigmoid,
    softmax,
    take,
    tanh,
)

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


class TestMatmul:
    def test_identity(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        out = matmul(Tensor(np.eye(2)), Tensor(a))
        np.testing.assert_array_equal(out.data, a)

    def test_hand_product(self):
        out = matmul(Tensor([[1.0, 0.0], [0.0, 0.0]]), Tensor([[5.0], [7.0]]))
        np.testing.assert_array_equal(out.data, [[5.0], [0.0]])

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 2\)"):
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 2))))

    def test_gradient_of_sum_wrt_a(self):
        rng = np.random.default_rng(0)
        b = Tensor(rng.normal(size=(3, 4)))
        err = finite_diff_check(lambda a: matmul(a.reshape(2, 3), b).sum(), rng.normal(size=6))
        assert err <= 1e-6

    def test_batched_broadcast_gradient(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(2, 5, 3, 4))
        err = finite_diff_check(
            lambda w: (matmul(Tensor(a), w.reshape(5, 4, 2)) ** 2).sum(), rng.normal(size=40)
        )
        assert err <= 1e-6


class TestSoftmax:
    def test_symmetric(self):
        np.testing.assert_allclose(softmax(Tensor([0.0, 0.0])).data, [0.5, 0.5])

    def test_no_overflow(self):
        out = softmax(Tensor([1000.0, 1000.0, 1000.0])).data
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out, [1 / 3] * 3, rtol=0, atol=1e-15)

    def test_logs_of_integers(self):
        out = softmax(Tensor(np.log([1.0, 2.0, 3.0]))).data
        np.testing.assert_allclose(out, [1 / 6, 2 / 6, 3 / 6], rtol=0, atol=1e-15)

    def test_mask_gives_exact_zeros(self):
        mask = np.array([True, True, False])
        out = softmax(Tensor([0.3, -1.0, 50.0]), mask=mask).data
        assert out[2] == 0.0
        assert abs(out.sum() - 1.0) <= 1e-12

    def test_bad_axis(self):
        with pytest.raises(DimensionError):
            softmax(Tensor(np.zeros((2, 2))), axis=2)

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, (4, 6), elements=st.floats(-50, 50)), st.integers(0, 1))
    def test_slices_sum_to_one(self, x, axis):
        out = softmax(Tensor(x), axis=axis).data
        assert np.all(out >= 0)
        np.testing.assert_allclose(out.sum(axis=axis), 1.0, rtol=0, atol=1e-12)


class TestLayerNorm:
    def test_constant_slice(self):
        out = layer_norm(Tensor([2.5, 2.5, 2.5]), Tensor(np.ones(3)), Tensor(np.zeros(3)))
        np.testing.assert_array_equal(out.data, [0.0, 0.0, 0.0])

    def test_two_points(self):
        out = layer_norm(Tensor([-1.0, 1.0]), Tensor(np.ones(2)), Tensor(np.zeros(2)))
        np.testing.assert_allclose(out.data, [-1.0, 1.0], atol=1e-4)
        np.testing.assert_allclose(out.data, np.array([-1.0, 1.0]) / math.sqrt(1 + 1e-5), rtol=1e-15)

    def test_zero_gain(self):
        bias = np.array([0.1, -0.2, 0.3])
        out = layer_norm(Tensor([4.0, -1.0, 9.0]), Tensor(np.zeros(3)), Tensor(bias))
        np.testing.assert_array_equal(out.data, bias)

    def test_gain_length_checked(self):
        with pytest.raises(DimensionError):
            layer_norm(Tensor(np.ones((2, 3))), Tensor(np.ones(2)), Tensor(np.zeros(3)))

    def test_gradient_all_inputs(self):
        rng = np.random.default_rng(3)
        w = rng.normal(size=(3, 5))

        def f(v):
            x, g, b = v[:15].reshape(3, 5), v[15:20], v[20:25]
            return (layer_norm(x, g, b) * Tensor(w)).sum()

        assert finite_diff_check(f, rng.normal(size=25)) <= 1e-6


class TestBackward:
    def test_square(self):
        x = Tensor([3.0], requires_grad=True)
        with Tape() as tape:
            y = (x * x).sum()
        grads = tape.backward(y)
        np.testing.assert_array_equal(grads[x], [6.0])
        np.testing.assert_array_equal(x.grad, [6.0])

    def test_unused_leaf_is_zero(self):
        x = Tensor([2.0], requires_grad=True)
        y = Tensor([5.0], requires_grad=True)
        with Tape() as tape:
            out = x.sum()
        gx, gy = tape.backward(out, [x, y])
        np.testing.assert_array_equal(gx, [1.0])
        np.testing.assert_array_equal(gy, [0.0])

    def test_non_scalar_loss(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with Tape() as tape:
            y = x * 2.0
        with pytest.raises(ContractError):
            tape.backward(y)

    def test_each_node_visited_once_and_inputs_precede(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with Tape() as tape:
            h = x * x
            y = (h + h).sum()
        produced = {id(x)}
        for node in tape.nodes:
            assert all(i in produced for i in node.input_ids)
            produced.add(node.output_id)
        grads = tape.backward(y)
        np.testing.assert_array_equal(grads[x], 4.0 * np.ones(3))

    def test_reused_subexpression_accumulates(self):
        x = Tensor([1.5], requires_grad=True)
        with Tape() as tape:
            y = x * x
            z = (y * y + y).sum()
        (g,) = tape.backward(z, [x])
        np.testing.assert_allclose(g, [4 * 1.5**3 + 2 * 1.5])

    def test_tape_linearity(self):
        rng = np.random.default_rng(5)
        w = rng.normal(size=(4, 4))
        x0 = rng.normal(size=4)

        def f(x):
            return (tanh(matmul(x.reshape(1, 4), Tensor(w))) ** 2).sum()

        def g(x):
            return sigmoid(x).sum() * 3.0

        def grad(fn):
            x = Tensor(x0, requires_grad=True)
            with Tape() as tape:
                out = fn(x)
            return tape.backward(out, [x])[0]

        a, b = 0.7, -2.5
        combined = grad(lambda x: f(x) * a + g(x) * b)
        np.testing.assert_allclose(combined, a * grad(f) + b * grad(g), rtol=1e-13, atol=1e-15)

    def test_no_tape_records_nothing(self):
        x = Tensor([1.0], requires_grad=True)
        y = x * 2.0
        assert not y.requires_grad

    def test_nested_tapes_record_innermost_only(self):
        x = Tensor([1.0], requires_grad=True)
        with Tape() as outer:
            with Tape() as inner:
                (x * 2.0).sum()
        assert len(outer) == 0 and len(inner) == 2


class TestPrimitiveGradients:
    rng = np.random.default_rng(11)

    @pytest.mark.parametrize(
        "fn",
        [
            lambda x: (x * x * x).sum(),
            lambda x: (x / (x * x + 1.0)).sum(),
            lambda x: (1.0 - x).sum() * 2.0,
            lambda x: sigmoid(x).sum(),
            lambda x: tanh(x * 0.5).sum(),
            lambda x: (relu(x) * x).sum(),
            lambda x: (softmax(x.reshape(2, 3), axis=1) * Tensor(np.arange(6.0).reshape(2, 3))).sum(),
            lambda x: (softmax(x.reshape(2, 3), axis=0) ** 2).sum(),
            lambda x: (x.reshape(2, 3).transpose() @ x.reshape(2, 3)).sum(),
            lambda x: (concat([x[:2], x[3:] * 2.0]) ** 2).sum(),
            lambda x: x.reshape(2, 3).mean(axis=1).sum() + x[1:4].sum() ** 2,
            lambda x: (x ** 2.0).mean(),
        ],
    )
    def test_matches_central_differences(self, fn):
        x = self.rng.uniform(0.2, 1.5, size=6) * self.rng.choice([-1, 1], size=6)
        assert finite_diff_check(fn, x, eps=1e-6) <= 1e-6

    def test_take_gradient_accumulates_duplicates(self):
        idx = np.array([0, 2, 2, 1])
        w = np.random.default_rng(2).normal(size=(4, 3))
        err = finite_diff_check(lambda t: (take(t.reshape(3, 3), idx) * Tensor(w)).sum() ** 2, np.arange(9.0) / 9)
        assert err <= 1e-6

    def test_masked_softmax_gradient(self):
        mask = np.tril(np.ones((3, 3), dtype=bool))
        w = np.arange(9.0).reshape(3, 3)
        err = finite_diff_check(lambda x: (softmax(x.reshape(3, 3), mask=mask) * Tensor(w)).sum(),
                                np.linspace(-1, 1, 9))
        assert err <= 1e-6


class TestFiniteDiffCheck:
    def test_sum_of_squares(self):
        assert finite_diff_check(lambda x: (x * x).sum(), [1.0, 2.0], eps=1e-5) <= 1e-8

    def test_constant(self):
        res = compare_gradients(lambda x: (x * 0.0).sum() + 4.0, [1.0, -3.0])
        np.testing.assert_array_equal(res.analytic, 0.0)
        np.testing.assert_array_equal(res.numeric, 0.0)
        assert res.max_relative_error == 0.0

    def test_detects_wrong_gradient(self):
        def bad(x):
            # value of x**2 with a stop-gradient through half of it
            return (x * Tensor(x.data)).sum()

        assert finite_diff_check(bad, [1.0, 2.0]) > 0.1

    def test_rejects_nonpositive_eps(self):
        with pytest.raises(ContractError):
            finite_diff_check(lambda x: x.sum(), [1.0], eps=0.0)


class TestAdamW:
    def test_zero_grad_no_decay(self):
        params = {"w": Tensor([1.0, -2.0])}
        state = AdamWState.initial(params, AdamWHyper(weight_decay=0.0))
        new, state = adamw_step(params, {"w": np.zeros(2)}, state)
        np.testing.assert_array_equal(new["w"].data, params["w"].data)
        assert state.step == 1

    def test_single_step_by_hand(self):
        params = {"p": Tensor([1.0])}
        state = AdamWState.initial(params, AdamWHyper(lr=0.0005, weight_decay=0.0))
        new, _ = adamw_step(params, {"p": np.array([1.0])}, state)
        assert new["p"].data[0] == pytest.approx(1 - 0.0005 / (1 + 1e-8), abs=1e-15)
        assert new["p"].data[0] == pytest.approx(0.9995, abs=1e-10)

    def test_defaults(self):
        h = AdamWHyper()
        assert (h.lr, h.beta1, h.beta2, h.eps, h.weight_decay) == (0.0005, 0.9, 0.999, 1e-8, 0.01)

    def test_descends_quadratic(self):
        params = {"p": Tensor([5.0])}
        state = AdamWState.initial(params, AdamWHyper(lr=0.05))
        for _ in range(1000):
            params, state = adamw_step(params, {"p": 2.0 * params["p"].data}, state)
        assert abs(params["p"].data[0]) < 0.5
        assert state.step == 1000

    def test_misaligned_grads(self):
        params = {"a": Tensor([1.0]), "b": Tensor([1.0])}
        state = AdamWState.initial(params)
        with pytest.raises(ContractError):
            adamw_step(params, {"a": np.ones(1)}, state)
        with pytest.raises(ContractError):
            adamw_step(params, {"a": np.ones(1), "b": np.ones(2)}, state)

    def test_clip(self):
        grads = {"a": np.array([3.0]), "b": np.array([4.0])}
        clipped, norm = clip_grad_norm(grads, 1.0)
        assert norm == 5.0
        np.testing.assert_allclose([clipped["a"][0], clipped["b"][0]], [0.6, 0.8])


class TestDropout:
    def test_identity_when_eval(self):
        x = Tensor(np.arange(5.0))
        assert dropout(x, 0.5, np.random.default_rng(0), training=False) is x

    def test_seeded_and_inverted(self):
        x = Tensor(np.ones(10000))
        a = dropout(x, 0.1, np.random.default_rng(4)).data
        b = dropout(x, 0.1, np.random.default_rng(4)).data
        np.testing.assert_array_equal(a, b)
        assert set(np.unique(a)) <= {0.0, 1.0 / 0.9}
        assert abs(a.mean() - 1.0) < 0.03


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (3, 4), elements=finite), arrays(np.float64, (4, 2), elements=finite))
def test_matmul_outputs_finite_and_deterministic(a, b):
    out1 = matmul(Tensor(a), Tensor(b)).data
    out2 = matmul(Tensor(a), Tensor(b)).data
    assert np.all(np.isfinite(out1))
    np.testing.assert_array_equal(out1, out2)
