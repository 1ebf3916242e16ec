import json

import numpy as np
import pytest

from estim.core import RngStream
from estim.errors import NonFiniteLoss, ShapeMismatch
from estim.neural import (
    NetworkSpec,
    TrainConfig,
    TrainedNetwork,
    avgpool1d,
    avgpool2d,
    backprop,
    conv1d,
    conv2d,
    dense,
    dumps_network,
    flatten,
    forward,
    initialize,
    loads_network,
    mse_loss,
    relu,
    train,
)


def small_dense_spec(inp=4, out=2):
    return NetworkSpec((inp,), (dense(3), relu(), dense(out)))


class TestForward:
    def test_zero_weight_network_maps_to_zero(self):
        spec = small_dense_spec()
        net = initialize(spec, seed=0)
        net.weights = [np.zeros_like(w) for w in net.weights]
        x = np.random.default_rng(0).standard_normal((5, 4))
        assert np.array_equal(forward(net, x), np.zeros((5, 2)))

    def test_identity_dense_layer(self):
        spec = NetworkSpec((3,), (dense(3),))
        net = TrainedNetwork(spec, [np.eye(3), np.zeros(3)])
        v = np.array([[1.0, -2.0, 0.5]])
        assert np.array_equal(forward(net, v), v)

    def test_conv1d_valid_hand_example(self):
        # kernel [1,1,1] on [1,2,3,4] -> [6, 9]
        spec = NetworkSpec((4, 1), (conv1d(1, 3), flatten()))
        net = TrainedNetwork(spec, [np.ones((3, 1, 1)), np.zeros(1)])
        out = forward(net, np.array([[1.0, 2.0, 3.0, 4.0]]))
        assert np.allclose(out.ravel(), [6.0, 9.0])

    def test_conv2d_hand_example(self):
        # all-ones 2x2 kernel sums each window
        spec = NetworkSpec((2, 2, 1), (conv2d(1, 2), flatten()))
        net = TrainedNetwork(spec, [np.ones((2, 2, 1, 1)), np.zeros(1)])
        out = forward(net, np.arange(4.0).reshape(1, 2, 2, 1))
        assert out.ravel()[0] == 6.0

    def test_avgpool1d_values(self):
        spec = NetworkSpec((5, 1), (avgpool1d(2), flatten()))
        net = TrainedNetwork(spec, [])
        out = forward(net, np.array([[1.0, 3.0, 5.0, 7.0, 100.0]]))
        assert np.allclose(out, [[2.0, 6.0]])  # trailing element dropped

    def test_rowwise_equals_batch(self):
        spec = NetworkSpec(
            (6, 1), (conv1d(2, 3), relu(), flatten(), dense(2))
        )
        net = initialize(spec, seed=3)
        x = np.random.default_rng(1).standard_normal((7, 6))
        batch = forward(net, x)
        rows = np.vstack([forward(net, x[i : i + 1]) for i in range(7)])
        assert np.allclose(batch, rows)

    def test_shape_mismatch(self):
        net = initialize(small_dense_spec(), seed=0)
        with pytest.raises(ShapeMismatch):
            forward(net, np.zeros((2, 9)))


class TestMseLoss:
    def test_exact_fit(self):
        x = np.array([[1.0, 2.0]])
        assert mse_loss(x, x) == 0.0

    def test_unit_example(self):
        assert mse_loss(np.zeros(2), np.ones(2)) == 1.0

    def test_hand_value(self):
        assert mse_loss(np.array([1.0, 2.0]), np.array([0.0, 4.0])) == 2.5

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            mse_loss(np.zeros(2), np.zeros(3))


class TestBackprop:
    def test_zero_residual_gives_zero_gradients(self):
        spec = NetworkSpec((3,), (dense(1),))
        net = TrainedNetwork(spec, [np.ones((3, 1)), np.zeros(1)])
        x = np.array([[1.0, 2.0, 3.0]])
        t = forward(net, x)
        loss, grads = backprop(net, x, t)
        assert loss == 0.0
        assert all(np.array_equal(g, np.zeros_like(g)) for g in grads)

    def test_single_dense_hand_gradient(self):
        # one sample, one linear layer: dL/dW = 2 (pred - t) x^T / P
        spec = NetworkSpec((3,), (dense(2),))
        rng = np.random.default_rng(4)
        net = TrainedNetwork(
            spec, [rng.standard_normal((3, 2)), rng.standard_normal(2)]
        )
        x = rng.standard_normal((1, 3))
        t = rng.standard_normal((1, 2))
        pred = forward(net, x)
        _, grads = backprop(net, x, t)
        expected_w = x.T @ (2.0 * (pred - t) / 2.0)
        expected_b = (2.0 * (pred - t) / 2.0).ravel()
        assert np.allclose(grads[0], expected_w)
        assert np.allclose(grads[1], expected_b)

    @pytest.mark.parametrize("spec", [
        NetworkSpec((5,), (dense(4), relu(), dense(2))),
        NetworkSpec((8, 1), (conv1d(3, 3), relu(), flatten(), dense(2))),
        NetworkSpec((9, 2), (conv1d(2, 3), relu(), avgpool1d(2), flatten(), dense(1))),
        NetworkSpec((6, 6, 1), (conv2d(3, 3), relu(), flatten(), dense(2))),
        NetworkSpec((8, 8, 1), (conv2d(4, 3), relu(), avgpool2d(2), conv2d(2, 3), relu(), flatten(), dense(2))),
    ])
    def test_gradients_match_finite_differences(self, spec):
        rng = np.random.default_rng(9)
        net = initialize(spec, seed=2)
        x = rng.standard_normal((4, *spec.input_shape))
        t = rng.standard_normal((4, spec.output_dim))
        _, grads = backprop(net, x, t)
        h = 1e-5
        for j, grad in enumerate(grads):
            flat = net.weights[j].ravel()
            gflat = grad.ravel()
            idx = rng.choice(flat.size, size=min(20, flat.size), replace=False)
            for i in idx:
                orig = flat[i]
                flat[i] = orig + h
                up, _ = backprop(net, x, t)
                flat[i] = orig - h
                down, _ = backprop(net, x, t)
                flat[i] = orig
                fd = (up - down) / (2 * h)
                assert abs(fd - gflat[i]) / (abs(gflat[i]) + 1e-8) < 1e-4


class TestTrain:
    def test_memorizes_single_sample(self):
        spec = NetworkSpec((4,), (dense(8), relu(), dense(1)))
        x = np.array([[0.5, -1.0, 2.0, 0.1]])
        t = np.array([[0.7]])
        net = train(spec, x, t, TrainConfig(0.01, epochs=800, batch_size=1, seed=1))
        assert net.loss_history[-1] < 1e-6

    def test_linear_regression_oracle(self):
        # theta = 2 * mean(x): a dense net must match the closed form
        rng = RngStream(21)
        g = rng.generator()
        x = g.standard_normal((600, 6))
        theta = 2.0 * x.mean(axis=1, keepdims=True)
        spec = NetworkSpec((6,), (dense(16), relu(), dense(1)))
        net = train(spec, x[:500], theta[:500], TrainConfig(0.01, 60, 50, seed=2))
        pred = forward(net, x[500:])
        held_out = float(np.mean((pred - theta[500:]) ** 2))
        assert held_out < 0.01 * float(np.var(theta))

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((80, 4))
        t = rng.standard_normal((80, 2))
        spec = small_dense_spec()
        cfg = TrainConfig(0.01, 5, 16, seed=9)
        n1 = train(spec, x, t, cfg)
        n2 = train(spec, x, t, cfg)
        assert n1.loss_history == n2.loss_history
        assert all(np.array_equal(a, b) for a, b in zip(n1.weights, n2.weights))

    def test_zero_learning_rate_keeps_weights(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((5, 4))
        t = rng.standard_normal((5, 2))
        spec = small_dense_spec()
        cfg = TrainConfig(learning_rate=0.0, epochs=3, batch_size=1, seed=4)
        init = initialize(spec, seed=4)
        net = train(spec, x, t, cfg)
        assert all(np.array_equal(a, b) for a, b in zip(net.weights, init.weights))

    def test_loss_decreases_on_noiseless_linear_task(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((400, 5))
        t = x @ np.array([[1.0], [0.5], [-1.0], [0.2], [2.0]])
        spec = NetworkSpec((5,), (dense(10), relu(), dense(1)))
        net = train(spec, x, t, TrainConfig(0.01, 30, 50, seed=5))
        assert net.loss_history[29] < net.loss_history[0]

    def test_loss_history_length_equals_epochs(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((30, 4))
        t = rng.standard_normal((30, 2))
        net = train(small_dense_spec(), x, t, TrainConfig(0.01, 7, 10, seed=0))
        assert len(net.loss_history) == 7

    def test_divergence_reports_epoch(self):
        # linear stack (no relu to die): Adam steps of size ~lr compound
        # the weights until the forward pass overflows
        rng = np.random.default_rng(6)
        x = rng.standard_normal((40, 4)) * 1e3
        t = rng.standard_normal((40, 2))
        spec = NetworkSpec((4,), (dense(4), dense(2)))
        epochs = 40
        with pytest.raises(NonFiniteLoss) as err:
            train(spec, x, t, TrainConfig(1e75, epochs, 10, seed=0))
        assert 0 <= err.value.epoch < epochs

    def test_empty_training_set_raises(self):
        with pytest.raises(ShapeMismatch):
            train(small_dense_spec(), np.zeros((0, 4)), np.zeros((0, 2)),
                  TrainConfig(0.01, 1, 1))


class TestSerialization:
    def test_round_trip_bit_exact(self):
        spec = NetworkSpec(
            (6, 1), (conv1d(3, 3), relu(), avgpool1d(2), flatten(), dense(2))
        )
        rng = np.random.default_rng(2)
        x = rng.standard_normal((50, 6))
        t = rng.standard_normal((50, 2))
        net = train(spec, x, t, TrainConfig(0.01, 3, 10, seed=7))
        text = dumps_network(net)
        back = loads_network(text)
        assert back.spec == net.spec
        assert back.loss_history == net.loss_history
        assert all(np.array_equal(a, b) for a, b in zip(back.weights, net.weights))
        probe = rng.standard_normal((4, 6))
        assert np.array_equal(forward(net, probe), forward(back, probe))

    def test_json_is_plain_document(self):
        net = initialize(small_dense_spec(), seed=1)
        doc = json.loads(dumps_network(net))
        assert set(doc) == {"spec", "weights", "loss_history"}
