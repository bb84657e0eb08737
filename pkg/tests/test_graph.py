"""
Op graph: forward values, reverse-mode gradients and precision handling
"""
import numpy as np
import pytest

from src.graph import OpGraph, Tensor, backward, constant, get_precision, grad_check, precision
from src.utils.errors import NumericError, ShapeError


def _param(data, name='p'):
    return Tensor(np.asarray(data, dtype=float), requires_grad=True, name=name)


class TestForward:

    def test_relu(self):
        g = OpGraph()
        out = g.relu(constant([-1.0, 0.0, 2.0]))
        np.testing.assert_array_equal(out.data, [0.0, 0.0, 2.0])

    def test_softmax_of_singleton_is_one(self):
        g = OpGraph()
        out = g.softmax(constant([[3.7]]), axis=-1)
        assert out.data[0, 0] == pytest.approx(1.0)

    def test_softmax_rows_sum_to_one(self, rng, float64):
        g = OpGraph()
        out = g.softmax(constant(rng.standard_normal((4, 5)) * 30), axis=-1)
        np.testing.assert_allclose(out.data.sum(axis=-1), 1.0, atol=1e-12)
        assert np.all(out.data >= 0)

    def test_softmax_ignores_a_constant_shift(self, rng, float64):
        x = rng.standard_normal((3, 5)) * 4
        g = OpGraph()
        for shift in (-50.0, 1e-3, 7.5, 300.0):
            np.testing.assert_allclose(g.softmax(constant(x + shift), axis=-1).data,
                                       g.softmax(constant(x), axis=-1).data, atol=1e-12)

    def test_layer_norm_hand_value(self, float64):
        g = OpGraph()
        out = g.layer_norm(constant([[1.0, 2.0, 3.0]]), constant(np.ones(3)), constant(np.zeros(3)))
        expected = np.array([-1.0, 0.0, 1.0]) / np.sqrt(2.0 / 3.0 + 1e-5)
        np.testing.assert_allclose(out.data[0], expected, atol=1e-9)
        assert out.data[0, 0] == pytest.approx(-1.2247, abs=1e-4)

    def test_layer_norm_constant_frame_is_zero(self, float64):
        g = OpGraph()
        out = g.layer_norm(constant(np.full((2, 6), 4.2)), constant(np.ones(6)), constant(np.zeros(6)))
        np.testing.assert_allclose(out.data, 0.0, atol=1e-9)

    def test_add_broadcasts_bias_only(self):
        g = OpGraph()
        out = g.add(constant(np.zeros((2, 3))), constant([1.0, 2.0, 3.0]))
        np.testing.assert_array_equal(out.data[1], [1.0, 2.0, 3.0])
        with pytest.raises(ShapeError):
            g.add(constant(np.zeros((2, 3))), constant(np.zeros((3, 2))))

    def test_matmul_shape_error(self):
        with pytest.raises(ShapeError, match="matmul"):
            OpGraph().matmul(constant(np.zeros((2, 3))), constant(np.zeros((2, 3))))

    def test_log_rejects_non_positive(self):
        with pytest.raises(NumericError, match="positive"):
            OpGraph().log(constant([1.0, 0.0]))

    def test_tensor_rejects_non_finite(self):
        with pytest.raises(NumericError, match="non-finite"):
            Tensor([1.0, np.inf])

    def test_tensor_rank_limit(self):
        with pytest.raises(ShapeError):
            Tensor(np.zeros((1, 1, 1, 1, 1)))


class TestBackward:

    def test_sum_gradient_is_ones(self, float64):
        x = _param(np.arange(6.0).reshape(2, 3))
        g = OpGraph()
        grads = backward(g, g.sum(x), {'x': x})
        np.testing.assert_array_equal(grads['x'], np.ones((2, 3)))
        np.testing.assert_array_equal(x.grad, np.ones((2, 3)))

    def test_non_scalar_loss(self):
        x = _param(np.ones(3))
        g = OpGraph()
        with pytest.raises(ShapeError, match="scalar"):
            backward(g, g.relu(x), {'x': x})

    def test_unused_parameter_gets_zero_gradient(self, float64):
        x, unused = _param([1.0, 2.0], 'x'), _param([[5.0]], 'u')
        g = OpGraph()
        grads = backward(g, g.sum(g.mul(x, x)), {'x': x, 'u': unused})
        np.testing.assert_array_equal(grads['x'], [2.0, 4.0])
        np.testing.assert_array_equal(grads['u'], [[0.0]])

    def test_shared_input_accumulates(self, float64):
        x = _param([3.0])
        g = OpGraph()
        loss = g.sum(g.add(g.scale(x, 2.0), g.mul(x, x)))
        assert backward(g, loss, {'x': x})['x'][0] == pytest.approx(2.0 + 6.0)

    @pytest.mark.parametrize('build', [
        lambda g, p: g.sum(g.tanh(g.matmul(p['a'], p['b']))),
        lambda g, p: g.sum(g.mul(g.sigmoid(p['a']), g.softmax(p['a'], axis=-1))),
        lambda g, p: g.mean(g.mean(g.div(p['a'], g.add(g.mul(p['a'], p['a']), constant(np.ones(3)))), axis=0), axis=0),
        lambda g, p: g.sum(g.log(g.add(g.mul(p['a'], p['a']), constant(np.ones(3))))),
        lambda g, p: g.sum(g.mul(g.reshape(g.transpose(p['a'], (1, 0)), (6,)), constant(np.arange(6.0)))),
        lambda g, p: g.sum(g.mul(g.concat([p['a'], g.slice(p['a'], (slice(0, 1), slice(None)))], axis=0),
                                 constant(np.arange(9.0).reshape(3, 3)))),
        lambda g, p: g.sum(g.mul(g.layer_norm(p['a'], p['gain'], p['bias']), constant(np.arange(6.0).reshape(2, 3)))),
        lambda g, p: g.sum(g.sub(g.sum(p['b'], axis=0), g.scale(g.sum(p['b'], axis=1), 0.3))),
        lambda g, p: g.sum(g.mul(g.relu(p['a']), constant(np.arange(1.0, 7.0).reshape(2, 3)))),
    ])
    def test_matches_finite_differences(self, rng, float64, build):
        for _ in range(10):
            params = {
                'a': _param(rng.standard_normal((2, 3)), 'a'),
                'b': _param(rng.standard_normal((3, 3)), 'b'),
                'gain': _param(rng.uniform(0.5, 1.5, 3), 'gain'),
                'bias': _param(rng.standard_normal(3), 'bias'),
            }
            assert grad_check(build, params) < 1e-6

    def test_linear_map_uses_adjoint(self, rng, float64):
        matrix = rng.standard_normal((4, 3))
        x = _param(rng.standard_normal(3), 'x')
        weights = rng.standard_normal(4)

        def f(g, p):
            mapped = g.linear_map(p['x'], lambda v: matrix @ v, lambda w: matrix.T @ w)
            return g.sum(g.mul(g.tanh(mapped), constant(weights)))

        assert grad_check(f, {'x': x}) < 1e-6

    def test_grad_check_of_constant_function(self, float64):
        x = _param([1.0, 2.0])
        assert grad_check(lambda g, p: g.sum(constant([4.0, 5.0])), {'x': x}) == 0.0

    def test_grad_check_requires_float64(self):
        with precision('float32'):
            x = _param([1.0])
            with pytest.raises(ValueError, match="float64"):
                grad_check(lambda g, p: g.sum(p['x']), {'x': x})


class TestPrecision:

    def test_context_restores_mode(self):
        before = get_precision()
        with precision('float64'):
            assert Tensor([1.0]).data.dtype == np.float64
        assert get_precision() == before

    def test_float32_tensors(self):
        with precision('float32'):
            assert Tensor([1.0]).data.dtype == np.float32

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            with precision('float16'):
                pass

    def test_forward_is_deterministic(self, rng, float64):
        a, b = rng.standard_normal((2, 5, 5))
        first = OpGraph().softmax(OpGraph().matmul(constant(a), constant(b)), axis=-1).data
        second = OpGraph().softmax(OpGraph().matmul(constant(a), constant(b)), axis=-1).data
        assert np.array_equal(first, second)

    def test_gradients_are_bitwise_reproducible(self, rng, float64):
        a, b = rng.standard_normal((3, 4)), rng.standard_normal((4, 4))

        def gradients():
            params = {'a': _param(a, 'a'), 'b': _param(b, 'b')}
            g = OpGraph()
            hidden = g.tanh(g.matmul(params['a'], params['b']))
            loss = g.sum(g.mul(g.softmax(hidden, axis=-1), g.sigmoid(g.layer_norm(
                hidden, constant(np.ones(4)), constant(np.zeros(4))))))
            return backward(g, loss, params)

        first, second = gradients(), gradients()
        for name in ('a', 'b'):
            assert np.array_equal(first[name], second[name])
