import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairshift import netcore
from fairshift.netcore import MLP


def numeric_grad(net, x, upstream, h=1e-5):
    theta = netcore.flatten(net.params())
    out = np.zeros_like(theta)
    for i in range(len(theta)):
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        f_up = np.sum(upstream * netcore.forward_cache(netcore.unflatten(net, up), x)[0])
        f_down = np.sum(upstream * netcore.forward_cache(netcore.unflatten(net, down), x)[0])
        out[i] = (f_up - f_down) / (2 * h)
    return out


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)


class TestForward:
    def test_zero_weights_output_final_bias(self):
        net = netcore.init([3, 4, 4, 1], 0)
        for w in net.weights:
            w[:] = 0.0
        net.biases[-1][:] = 0.7
        assert netcore.forward(net, np.array([1.0, -2.0, 3.0])) == pytest.approx(0.7)

    def test_affine_net(self):
        net = MLP([2, 1], [np.array([[2.0, 3.0]])], [np.array([1.0])])
        assert netcore.forward(net, np.array([1.0, 1.0])) == 6.0

    def test_dead_hidden_layer(self):
        # every hidden pre-activation negative: only the output bias survives
        net = MLP([2, 2, 1], [np.array([[1.0, 1.0], [2.0, 0.5]]), np.array([[4.0, -3.0]])],
                  [np.array([-10.0, -10.0]), np.array([0.25])])
        assert netcore.forward(net, np.array([1.0, 2.0])) == 0.25

    def test_hand_forward_with_one_active_unit(self):
        net = MLP([2, 2, 1], [np.array([[1.0, -1.0], [0.5, 0.5]]), np.array([[2.0, 3.0]])],
                  [np.array([0.0, 0.0]), np.array([1.0])])
        # hidden = relu([-1, 1.5]) = [0, 1.5]; out = 3*1.5 + 1
        assert netcore.forward(net, np.array([1.0, 2.0])) == pytest.approx(5.5)

    def test_batch_matches_rows(self):
        net = netcore.init([3, 5, 1], 1)
        X = np.random.default_rng(0).normal(size=(6, 3))
        batch = netcore.forward(net, X)
        np.testing.assert_allclose(batch, [netcore.forward(net, x) for x in X])

    def test_dimension_mismatch(self):
        with pytest.raises(netcore.DimensionMismatchError):
            netcore.forward(netcore.init([3, 1], 0), np.zeros(2))

    def test_piecewise_linear_along_a_line(self):
        rng = np.random.default_rng(3)
        net = netcore.init([4, 8, 8, 1], 4)
        hits = 0
        for _ in range(50):
            x, v = rng.normal(size=4), rng.normal(size=4)
            t = 1e-4
            vals = [netcore.forward(net, x + k * t * v) for k in (-1, 0, 1)]
            if abs(vals[0] - 2 * vals[1] + vals[2]) < 1e-10:
                hits += 1
        # kinks are hit only on a measure-zero set
        assert hits >= 48


class TestBackward:
    def test_affine_gradient(self):
        net = MLP([3, 1], [np.array([[1.0, 2.0, 3.0]])], [np.array([0.5])])
        x = np.array([[0.5, -1.0, 2.0]])
        g = netcore.backward(net, x, 2.0)
        np.testing.assert_allclose(g.weights[0], 2.0 * x)
        np.testing.assert_allclose(g.biases[0], [2.0])
        np.testing.assert_allclose(g.inputs, 2.0 * net.weights[0])

    def test_zero_upstream(self):
        net = netcore.init([3, 4, 1], 0)
        g = netcore.backward(net, np.ones((2, 3)), 0.0)
        assert all(not np.any(p) for p in g.params())

    def test_shapes_mirror_net(self):
        net = netcore.init([5, 7, 3, 1], 0)
        g = netcore.backward(net, np.ones((4, 5)), 1.0)
        assert [p.shape for p in g.params()] == [p.shape for p in net.params()]

    def test_relu_subgradient_at_zero_is_zero(self):
        net = MLP([1, 1, 1], [np.array([[1.0]]), np.array([[1.0]])],
                  [np.array([0.0]), np.array([0.0])])
        g = netcore.backward(net, np.array([[0.0]]), 1.0)
        assert g.weights[0][0, 0] == 0.0
        assert g.inputs[0, 0] == 0.0

    def test_finite_differences_random_pairs(self):
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(100):
            hidden = [int(rng.integers(1, 9))] * int(rng.choice([0, 2, 3]))
            d = int(rng.integers(1, 5))
            net = netcore.init([d] + hidden + [1], rng)
            for b in net.biases:
                b[:] = rng.normal(scale=0.5, size=b.shape)
            x = rng.normal(size=(1, d))
            up = float(rng.normal())
            analytic = netcore.flatten(netcore.backward(net, x, up).params())
            worst = max(worst, rel_err(analytic, numeric_grad(net, x, up)))
        assert worst < 1e-4

    @pytest.mark.parametrize("n_hidden", [0, 2, 3])
    @pytest.mark.parametrize("width", [1, 8, 32])
    def test_finite_differences_architectures(self, n_hidden, width):
        rng = np.random.default_rng(n_hidden * 100 + width)
        net = netcore.init([3] + [width] * n_hidden + [1], rng)
        for b in net.biases:
            b[:] = rng.normal(scale=0.3, size=b.shape)
        X = rng.normal(size=(4, 3))
        up = rng.normal(size=4)
        analytic = netcore.flatten(netcore.backward(net, X, up).params())
        assert rel_err(analytic, numeric_grad(net, X, up)) < 1e-4

    def test_input_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        net = netcore.init([3, 6, 6, 1], rng)
        x = rng.normal(size=(1, 3))
        analytic = netcore.backward(net, x, 1.0).inputs[0]
        h = 1e-6
        numeric = [(netcore.forward(net, x[0] + h * e) - netcore.forward(net, x[0] - h * e)) / (2 * h)
                   for e in np.eye(3)]
        assert rel_err(analytic, np.array(numeric)) < 1e-6


class TestAdam:
    def test_first_step_by_hand(self):
        net = MLP([1, 1], [np.array([[0.0]])], [np.array([2.0])])
        g = netcore.GradBundle([np.array([[0.0]])], [np.array([0.3])])
        new, state = netcore.adam_step(net, g, netcore.adam_init(net), lr=0.01)
        # m_hat = g, v_hat = g^2 on the first step
        assert new.biases[0][0] == pytest.approx(2.0 - 0.01 * 0.3 / (0.3 + 1e-8), abs=1e-15)
        assert state.t == 1
        np.testing.assert_allclose(state.m[1], [0.03])
        np.testing.assert_allclose(state.v[1], [0.3 ** 2 * 0.001])

    def test_zero_gradient_leaves_parameters(self):
        net = netcore.init([3, 4, 1], 0)
        zero = netcore.GradBundle([np.zeros_like(w) for w in net.weights],
                                  [np.zeros_like(b) for b in net.biases])
        new, _ = netcore.adam_step(net, zero, netcore.adam_init(net), 0.1)
        for a, b in zip(new.params(), net.params()):
            np.testing.assert_array_equal(a, b)

    def test_deterministic(self):
        net = netcore.init([2, 3, 1], 0)
        g = netcore.backward(net, np.ones((1, 2)), 1.0)
        state = netcore.adam_init(net)
        a, _ = netcore.adam_step(net, g, state, 0.01)
        b, _ = netcore.adam_step(net, g, state, 0.01)
        for p, q in zip(a.params(), b.params()):
            np.testing.assert_array_equal(p, q)

    def test_does_not_mutate_input(self):
        net = netcore.init([2, 3, 1], 0)
        before = netcore.flatten(net.params()).copy()
        g = netcore.backward(net, np.ones((1, 2)), 1.0)
        netcore.adam_step(net, g, netcore.adam_init(net), 0.5)
        np.testing.assert_array_equal(netcore.flatten(net.params()), before)


class TestInit:
    def test_fixed_seed_identical(self):
        a, b = netcore.init([4, 8, 1], 3), netcore.init([4, 8, 1], 3)
        assert netcore.flatten(a.params()).tobytes() == netcore.flatten(b.params()).tobytes()

    def test_different_seeds_differ(self):
        a, b = netcore.init([4, 8, 1], 3), netcore.init([4, 8, 1], 4)
        assert not np.array_equal(a.weights[0], b.weights[0])

    @settings(max_examples=50)
    @given(st.lists(st.integers(1, 40), min_size=2, max_size=5), st.integers(0, 2**32 - 1))
    def test_glorot_bounds_and_zero_biases(self, sizes, seed):
        net = netcore.init(sizes, seed)
        for w, fan_in, fan_out in zip(net.weights, sizes[:-1], sizes[1:]):
            assert w.shape == (fan_out, fan_in)
            assert np.all(np.abs(w) <= np.sqrt(6.0 / (fan_in + fan_out)))
        assert all(not np.any(b) for b in net.biases)

    def test_serialisation_roundtrip(self):
        net = netcore.init([3, 5, 5, 1], 9)
        back = MLP.from_dict(net.to_dict())
        for p, q in zip(back.params(), net.params()):
            np.testing.assert_array_equal(p, q)

    def test_bad_shapes_rejected(self):
        with pytest.raises(netcore.DimensionMismatchError):
            MLP([2, 1], [np.zeros((1, 3))], [np.zeros(1)])
