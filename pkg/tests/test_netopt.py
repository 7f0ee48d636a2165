import numpy as np
import pytest

from core.errors import OptimizerFault, ShapeError
from core.netopt import AdamState, Mlp, adam_step, check_gradients, finite_diff_check, init


class TestInit:
    def test_seeded(self):
        a = init((5, 7, 3), seed=12)
        b = init((5, 7, 3), seed=12)
        np.testing.assert_array_equal(a.flat_parameters(), b.flat_parameters())

    @pytest.mark.parametrize('dims, count', [((26, 64, 64, 4), 6084), ((3, 2), 8)])
    def test_parameter_count(self, dims, count):
        assert init(dims, seed=0).parameter_count == count

    @pytest.mark.parametrize('dims', [(), (4,), (4, 0, 2)])
    def test_bad_dims(self, dims):
        with pytest.raises(ShapeError):
            init(dims, seed=0)


class TestForward:
    def test_zero_network(self):
        net = Mlp((3, 4, 2), [np.zeros((3, 4)), np.zeros((4, 2))], [np.zeros(4), np.zeros(2)])
        np.testing.assert_array_equal(net.forward(np.ones((5, 3))), np.zeros((5, 2)))

    def test_identity_layer(self):
        net = Mlp((3, 3), [np.eye(3)], [np.zeros(3)])
        x = np.array([[1.0, -2.0, 3.5]])
        np.testing.assert_array_equal(net.forward(x), x)

    def test_rows_independent(self):
        net = init((4, 6, 2), seed=3)
        rows = np.random.default_rng(0).standard_normal((2, 4))
        batched = net.forward(rows)
        np.testing.assert_allclose(batched[0], net.forward(rows[0])[0])
        np.testing.assert_allclose(batched[1], net.forward(rows[1])[0])

    def test_width_mismatch(self):
        with pytest.raises(ShapeError):
            init((4, 2), seed=0).forward(np.ones((1, 5)))


class TestGrad:
    def test_matches_finite_differences(self):
        net = init((5, 8, 8, 3), seed=21)
        batch = np.random.default_rng(1).standard_normal((4, 5))
        assert finite_diff_check(net, batch, tolerance=1e-4).passed

    def test_zero_input_batch(self):
        net = init((5, 8, 3), seed=2)
        assert finite_diff_check(net, np.zeros((4, 5)), tolerance=1e-4).passed

    def test_corrupted_gradient_fails(self):
        net = init((5, 8, 3), seed=4)
        batch = np.random.default_rng(2).standard_normal((4, 5))

        def doubled(n, b, upstream):
            grads, _ = n.grad(b, upstream)
            return [2.0 * g for g in grads]

        assert not finite_diff_check(net, batch, tolerance=1e-4, grad_fn=doubled).passed

    def test_zero_upstream(self):
        net = init((3, 4, 2), seed=5)
        grads, input_grad = net.grad(np.ones((2, 3)), np.zeros((2, 2)))
        assert all(not np.any(g) for g in grads)
        assert not np.any(input_grad)

    def test_linear_input_gradient_is_weight_row(self):
        weights = np.array([[0.5], [-1.5], [2.0]])
        net = Mlp((3, 1), [weights], [np.array([0.1])])
        _, input_grad = net.grad(np.array([[1.0, 2.0, 3.0]]), np.ones((1, 1)))
        np.testing.assert_allclose(input_grad[0], weights[:, 0])

    def test_upstream_shape_mismatch(self):
        net = init((3, 2), seed=0)
        with pytest.raises(ShapeError):
            net.grad(np.ones((2, 3)), np.ones((3, 2)))

    @pytest.mark.slow
    def test_many_random_nets(self):
        rng = np.random.default_rng(100)
        for seed in range(100):
            dims = (int(rng.integers(1, 6)), int(rng.integers(1, 9)), int(rng.integers(1, 4)))
            batch = rng.standard_normal((4, dims[0]))
            assert finite_diff_check(init(dims, seed), batch, tolerance=1e-4, seed=seed).passed


class TestAdam:
    def test_zero_gradients_leave_params(self):
        params = [np.array([1.0, -2.0]), np.array([[0.5]])]
        state = AdamState.for_params(params, learning_rate=0.1)
        updated = adam_step(state, params, [np.zeros(2), np.zeros((1, 1))])
        for before, after in zip(params, updated):
            np.testing.assert_array_equal(before, after)

    def test_first_step_closed_form(self):
        lr, eps = 0.01, 1e-8
        params = [np.array([1.0, 1.0])]
        grad = np.array([0.5, -4.0])
        state = AdamState.for_params(params, learning_rate=lr, epsilon=eps)
        updated = adam_step(state, params, [grad])[0]
        # bias-corrected first step: m_hat = g, v_hat = g^2
        expected = params[0] - lr * grad / (np.abs(grad) + eps)
        np.testing.assert_allclose(updated, expected, rtol=1e-12)
        assert state.step == 1

    def test_deterministic(self):
        params = [np.array([0.3, -0.7])]
        grads = [np.array([0.2, 0.1])]
        first = adam_step(AdamState.for_params(params), params, grads)[0]
        second = adam_step(AdamState.for_params(params), params, grads)[0]
        np.testing.assert_array_equal(first, second)

    def test_nan_gradient(self):
        params = [np.array([1.0])]
        state = AdamState.for_params(params)
        with pytest.raises(OptimizerFault):
            adam_step(state, params, [np.array([np.nan])])
        assert state.step == 0


def test_serialization_restores_network():
    net = init((4, 5, 2), seed=8)
    restored, offset = Mlp.from_bytes(net.to_bytes())
    assert offset == len(net.to_bytes())
    np.testing.assert_array_equal(restored.flat_parameters(), net.flat_parameters())
    assert restored.layer_dims == net.layer_dims


def test_truncated_payload():
    with pytest.raises(ShapeError):
        Mlp.from_bytes(init((4, 2), seed=0).to_bytes()[:-3])


def test_check_gradients_on_quadratic():
    x = np.array([1.0, -2.0, 0.5])

    def loss():
        return float(np.sum(x * x))

    assert check_gradients(loss, [x], [2.0 * x]).passed
