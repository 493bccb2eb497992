"""Finite-difference verification of the end-to-end analytic gradient.

Central differences on every parameter coordinate are compared against the
backward pass for the mean BCE on a random mini-batch. Inputs whose ReLU
pre-activations or max-pool windows sit too close to a kink/tie are
resampled, since the loss is not differentiable there.
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from .layers import _time_windows
from .model import ModelConfig, ModelParams, forward, init_params, loss_and_grads

# margin around ReLU kinks / pool ties below which a draw is rejected
KINK_MARGIN = 2e-4


def finite_diff_grads(
    params: ModelParams, x: np.ndarray, y: np.ndarray, eps: float = 1e-5
) -> dict[str, np.ndarray]:
    """Central-difference gradient of the mean BCE for every coordinate."""
    from .layers import bce_loss

    def loss_at() -> float:
        probs, _, _ = forward(params, x)
        return bce_loss(probs, y)

    grads = {}
    for name, tensor in params.tensors.items():
        g = np.zeros_like(tensor)
        flat = tensor.ravel()
        g_flat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = loss_at()
            flat[i] = orig - eps
            lo = loss_at()
            flat[i] = orig
            g_flat[i] = (hi - lo) / (2.0 * eps)
        grads[name] = g
    return grads


def max_relative_error(
    analytic: dict[str, np.ndarray], numeric: dict[str, np.ndarray]
) -> float:
    """Max over tensors of max|a - n| / max(max|a|, max|n|, 1e-8)."""
    worst = 0.0
    for name in analytic:
        a = analytic[name]
        n = numeric[name]
        denom = max(float(np.abs(a).max()), float(np.abs(n).max()), 1e-8)
        err = float(np.abs(a - n).max()) / denom
        worst = max(worst, err)
    return worst


def _kink_margin(params: ModelParams, x: np.ndarray) -> float:
    """Distance of the closest pre-activation to a ReLU kink or pool tie."""
    cfg = params.config
    _, _, cache = forward(params, x)
    c1, c2, c3, _, c5, _ = cache
    margin = np.inf
    if cfg.conv_activation == "relu":
        margin = min(margin, float(np.abs(c1[2]).min()), float(np.abs(c2[2]).min()))
    if cfg.dense1_activation == "relu":
        margin = min(margin, float(np.abs(c5[2]).min()))
    if cfg.pool_size > 1:
        a2 = c2[3]
        win = _time_windows(a2, cfg.pool_size, cfg.pool_stride)
        top2 = -np.partition(-win, 1, axis=2)[:, :, :2, :]
        gap = top2[:, :, 0, :] - top2[:, :, 1, :]
        if cfg.conv_activation == "relu":
            # zeros are clipped ReLU units; with the ReLU margin enforced they
            # cannot flip under an eps-perturbation, so only live pairs count
            live = top2[:, :, 1, :] > 0
            if live.any():
                margin = min(margin, float(gap[live].min()))
        else:
            margin = min(margin, float(gap.min()))
    return margin


def make_check_batch(
    config: ModelConfig, window_len: int, batch: int, seed: int = 0
) -> tuple[ModelParams, np.ndarray, np.ndarray]:
    """Seeded params and a random batch resampled away from kinks/ties."""
    params = init_params(config)
    rng = np.random.default_rng(seed)
    for _ in range(100):
        x = rng.standard_normal((batch, window_len, 3))
        y = rng.integers(0, 2, size=batch)
        if len(set(y.tolist())) < 2:
            continue
        if _kink_margin(params, x) > KINK_MARGIN:
            return params, x, y
    raise ValidationError("could not draw a batch clear of ReLU kinks / pool ties")


def grad_check(
    mcfg: ModelConfig | None = None,
    eps: float = 1e-5,
    window_len: int = 16,
    batch: int = 4,
    seed: int = 0,
) -> float:
    """Max relative error of analytic vs finite-difference gradients.

    Keep the config tiny: full central differencing evaluates the forward
    pass twice per parameter coordinate.
    """
    if mcfg is None:
        mcfg = ModelConfig(
            conv1_filters=2,
            conv1_kernel=3,
            conv2_filters=2,
            conv2_kernel=3,
            lstm_hidden=4,
        )
    mcfg.validate()
    params, x, y = make_check_batch(mcfg, window_len, batch, seed)
    _, _, analytic = loss_and_grads(params, x, y)
    numeric = finite_diff_grads(params, x, y, eps)
    return max_relative_error(analytic, numeric)
