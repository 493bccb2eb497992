import math

import numpy as np
import pytest

from vitalnet.errors import ValidationError
from vitalnet.nn.layers import (
    bce_loss,
    bce_loss_grad,
    conv1d_apply,
    conv1d_backward,
    conv1d_forward,
    dense_apply,
    dense_backward,
    dense_forward,
    lstm_backward,
    lstm_forward,
    lstm_step,
    maxpool1d_apply,
    maxpool1d_backward,
    maxpool1d_forward,
)


def numeric_grad(f, x, eps=1e-6):
    """Independent central-difference oracle over every element of x."""
    g = np.zeros_like(x, dtype=float)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f()
        flat[i] = orig - eps
        lo = f()
        flat[i] = orig
        gf[i] = (hi - lo) / (2 * eps)
    return g


def rel_err(a, b):
    denom = max(np.abs(a).max(), np.abs(b).max(), 1e-8)
    return np.abs(a - b).max() / denom


class TestConv1d:
    def test_hand_sum(self):
        x = np.array([[1.0], [2.0], [3.0], [4.0]])
        w = np.array([[[1.0], [1.0]]])  # F=1, K=2, C=1
        out = conv1d_apply(x, w, np.zeros(1), activation="linear")
        assert out[:, 0].tolist() == [3.0, 5.0, 7.0]

    def test_kernel_one_identity(self):
        x = np.arange(8, dtype=float).reshape(4, 2)
        w = np.zeros((2, 1, 2))
        w[0, 0, 0] = 1.0
        w[1, 0, 1] = 1.0
        out = conv1d_apply(x, w, np.zeros(2), activation="linear")
        assert np.array_equal(out, x)

    def test_too_short_input(self):
        with pytest.raises(ValidationError):
            conv1d_apply(np.ones((2, 1)), np.ones((1, 5, 1)), np.zeros(1))

    @pytest.mark.parametrize("activation", ["linear", "relu", "tanh"])
    def test_gradients_match_finite_differences(self, activation):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((3, 9, 2))
        w = rng.standard_normal((4, 3, 2)) * 0.5
        b = rng.standard_normal(4) * 0.1
        if activation == "relu":
            # keep pre-activations away from the kink
            out, cache = conv1d_forward(x, w, b, activation)
            assert np.abs(cache[2]).min() > 1e-3
        proj = rng.standard_normal((3, 7, 4))

        def loss():
            out, _ = conv1d_forward(x, w, b, activation)
            return float((out * proj).sum())

        _, cache = conv1d_forward(x, w, b, activation)
        dx, dw, db = conv1d_backward(proj, cache)
        assert rel_err(dx, numeric_grad(loss, x)) < 1e-6
        assert rel_err(dw, numeric_grad(loss, w)) < 1e-6
        assert rel_err(db, numeric_grad(loss, b)) < 1e-6


class TestMaxPool:
    def test_hand_example(self):
        x = np.array([[1.0], [3.0], [2.0], [5.0]])
        out = maxpool1d_apply(x, 2, 2)
        assert out[:, 0].tolist() == [3.0, 5.0]

    def test_constant_ties_route_first(self):
        x = np.ones((1, 4, 1))
        out, cache = maxpool1d_forward(x, 2, 2)
        assert np.all(out == 1.0)
        dx = maxpool1d_backward(np.ones((1, 2, 1)), cache)
        assert dx[0, :, 0].tolist() == [1.0, 0.0, 1.0, 0.0]

    def test_too_short(self):
        with pytest.raises(ValidationError):
            maxpool1d_apply(np.ones((1, 2)), 2, 2)

    def test_gradient_away_from_ties(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((2, 8, 3))
        proj = rng.standard_normal((2, 4, 3))

        def loss():
            out, _ = maxpool1d_forward(x, 2, 2)
            return float((out * proj).sum())

        _, cache = maxpool1d_forward(x, 2, 2)
        dx = maxpool1d_backward(proj, cache)
        assert rel_err(dx, numeric_grad(loss, x)) < 1e-6


class TestLstm:
    def test_zero_params_zero_state(self):
        wx, wh, b = np.zeros((2, 8)), np.zeros((2, 8)), np.zeros(8)
        h, c = lstm_step(np.ones(2), np.zeros(2), np.zeros(2), wx, wh, b)
        assert np.all(h == 0) and np.all(c == 0)

    def test_zero_params_carry_cell(self):
        # gates sigmoid(0)=0.5, candidate tanh(0)=0:
        # c' = 0.5*2 = 1, h' = 0.5*tanh(1)
        wx, wh, b = np.zeros((1, 4)), np.zeros((1, 4)), np.zeros(4)
        h, c = lstm_step(np.zeros(1), np.zeros(1), np.array([2.0]), wx, wh, b)
        assert c[0] == pytest.approx(1.0, abs=1e-12)
        assert h[0] == pytest.approx(0.5 * math.tanh(1.0), abs=1e-12)
        assert h[0] == pytest.approx(0.380797, abs=1e-6)

    def test_batched_matches_stepwise(self):
        rng = np.random.default_rng(2)
        d, hdim, t = 3, 4, 5
        wx = rng.standard_normal((d, 4 * hdim)) * 0.4
        wh = rng.standard_normal((hdim, 4 * hdim)) * 0.4
        b = rng.standard_normal(4 * hdim) * 0.1
        x = rng.standard_normal((1, t, d))
        h_batch, _ = lstm_forward(x, wx, wh, b)
        h = np.zeros(hdim)
        c = np.zeros(hdim)
        for step in range(t):
            h, c = lstm_step(x[0, step], h, c, wx, wh, b)
        assert np.allclose(h_batch[0], h, atol=1e-12)

    def test_gradients_through_time(self):
        rng = np.random.default_rng(3)
        d, hdim, t = 2, 3, 5
        wx = rng.standard_normal((d, 4 * hdim)) * 0.5
        wh = rng.standard_normal((hdim, 4 * hdim)) * 0.5
        b = rng.standard_normal(4 * hdim) * 0.1
        x = rng.standard_normal((2, t, d))
        proj = rng.standard_normal((2, hdim))

        def loss():
            h, _ = lstm_forward(x, wx, wh, b)
            return float((h * proj).sum())

        _, cache = lstm_forward(x, wx, wh, b)
        dx, dwx, dwh, db = lstm_backward(proj, cache)
        assert rel_err(dwx, numeric_grad(loss, wx)) < 1e-6
        assert rel_err(dwh, numeric_grad(loss, wh)) < 1e-6
        assert rel_err(db, numeric_grad(loss, b)) < 1e-6
        assert rel_err(dx, numeric_grad(loss, x)) < 1e-6


class TestDense:
    def test_identity(self):
        x = np.array([1.0, -2.0, 3.0])
        out = dense_apply(x, np.eye(3), np.zeros(3), activation="linear")
        assert np.array_equal(out, x)

    def test_zero_sigmoid_is_half(self):
        out = dense_apply(np.ones(4), np.zeros((4, 1)), np.zeros(1), activation="sigmoid")
        assert out[0] == 0.5

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            dense_apply(np.ones(3), np.ones((4, 2)), np.zeros(2))

    @pytest.mark.parametrize("activation", ["linear", "relu", "sigmoid"])
    def test_gradients(self, activation):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((3, 5))
        w = rng.standard_normal((5, 4)) * 0.5
        b = rng.standard_normal(4) * 0.1
        proj = rng.standard_normal((3, 4))
        if activation == "relu":
            _, cache = dense_forward(x, w, b, activation)
            assert np.abs(cache[2]).min() > 1e-3

        def loss():
            out, _ = dense_forward(x, w, b, activation)
            return float((out * proj).sum())

        _, cache = dense_forward(x, w, b, activation)
        dx, dw, db = dense_backward(proj, cache)
        assert rel_err(dx, numeric_grad(loss, x)) < 1e-6
        assert rel_err(dw, numeric_grad(loss, w)) < 1e-6
        assert rel_err(db, numeric_grad(loss, b)) < 1e-6


class TestBce:
    def test_half_is_ln2(self):
        assert bce_loss(np.array([0.5]), np.array([1])) == pytest.approx(
            math.log(2), abs=1e-12
        )
        assert bce_loss(np.array([0.5]), np.array([0])) == pytest.approx(
            math.log(2), abs=1e-12
        )

    def test_perfect_prediction_near_zero(self):
        assert bce_loss(np.array([1.0]), np.array([1])) <= -math.log(1 - 1e-7) + 1e-12
        assert bce_loss(np.array([0.0]), np.array([0])) <= -math.log(1 - 1e-7) + 1e-12

    def test_grad_at_half(self):
        g = bce_loss_grad(np.array([0.5]), np.array([1]))
        assert g[0] == pytest.approx(-2.0, abs=1e-12)

    def test_grad_matches_finite_differences(self):
        p = np.array([0.3])
        y = np.array([1])

        def loss():
            return bce_loss(p, y)

        assert rel_err(bce_loss_grad(p, y), numeric_grad(loss, p)) < 1e-6
