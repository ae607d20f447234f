"""Finite-difference checks for every tensorcore op and the full network graph."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import tensorcore as tc
from .posenet.losses import total_loss
from .posenet.network import LossWeights, NetworkConfig, PoseNet
from .posenet.targets import batch_targets
from .tensorcore import Parameter

TOLERANCE = 1e-3


@dataclass
class CheckOutcome:
    name: str
    seeds: int
    max_rel_error: float
    checked: int
    skipped_kinks: int

    @property
    def passed(self) -> bool:
        return self.checked > 0 and self.max_rel_error < TOLERANCE


def _nudged(rng, shape, margin=0.05):
    """Normal samples kept at least ``margin`` away from zero (relu kinks)."""
    x = rng.normal(size=shape)
    return np.where(np.abs(x) < margin, np.sign(x + 1e-12) * margin, x)


def _param(rng, *shape):
    return Parameter(rng.normal(size=shape) * 0.5)


# Each builder returns (loss_fn, params) in float64.
def _conv(rng):
    x = Parameter(_nudged(rng, (2, 3, 7, 6)))
    w = _param(rng, 4, 3, 3, 3)
    b = _param(rng, 4)
    stride = int(rng.integers(1, 3))
    t = rng.normal(size=(2, 4, -(-7 // stride), -(-6 // stride)))
    return (lambda: tc.mse_loss(tc.conv2d(x, w, b, stride=stride), t)), [x, w, b]


def _upsample(rng):
    x = Parameter(rng.normal(size=(2, 3, 3, 4)))
    t = rng.normal(size=(2, 3, 6, 8))
    return (lambda: tc.mse_loss(tc.upsample2x_nearest(x), t)), [x]


def _relu(rng):
    x = Parameter(_nudged(rng, (3, 5)))
    t = rng.normal(size=(3, 5))
    return (lambda: tc.mse_loss(tc.relu(x), t)), [x]


def _sigmoid(rng):
    x = Parameter(rng.normal(size=(3, 5)) * 3)
    t = rng.uniform(size=(3, 5))
    return (lambda: tc.mse_loss(tc.sigmoid(x), t)), [x]


def _add(rng):
    a = Parameter(rng.normal(size=(2, 3, 4, 4)))
    b = Parameter(rng.normal(size=(1, 3, 1, 1)))
    t = rng.normal(size=(2, 3, 4, 4))
    return (lambda: tc.mse_loss(tc.add(a, b), t)), [a, b]


def _concat(rng):
    a = Parameter(rng.normal(size=(2, 2, 3, 3)))
    b = Parameter(rng.normal(size=(2, 3, 3, 3)))
    t = rng.normal(size=(2, 5, 3, 3))
    return (lambda: tc.mse_loss(tc.concat_channels([a, b]), t)), [a, b]


def _linear(rng):
    x = Parameter(rng.normal(size=(4, 6)))
    w = _param(rng, 3, 6)
    b = _param(rng, 3)
    t = rng.normal(size=(4, 3))
    return (lambda: tc.mse_loss(tc.linear(x, w, b), t)), [x, w, b]


def _masked_mse(rng):
    x = Parameter(rng.normal(size=(4, 6)))
    t = rng.normal(size=(4, 6))
    m = (rng.uniform(size=(4, 6)) < 0.5).astype(float)
    m[0, 0] = 1.0
    return (lambda: tc.mse_loss(x, t, m)), [x]


def _bce(rng):
    x = Parameter(rng.normal(size=(4, 6)) * 3)
    y = rng.uniform(size=(4, 6))
    m = rng.uniform(size=(4, 6))
    return (lambda: tc.bce_with_logits(x, y, m)), [x]


def _stop(rng):
    x = Parameter(rng.normal(size=(3, 4)))
    t = rng.normal(size=(3, 4))
    return (lambda: tc.mse_loss(tc.add(x, tc.stop_gradient(x)), t)), [x]


def _slice_flatten_scale(rng):
    x = Parameter(rng.normal(size=(2, 3, 2, 2)))
    t = rng.normal(size=(2, 5))
    return (lambda: tc.scale(tc.mse_loss(tc.slice_features(tc.flatten(x), 2, 7), t), 3.0)), [x]


def _sum(rng):
    x = Parameter(rng.normal(size=(2, 3, 4)))
    w = rng.normal(size=(2, 3, 4))
    return (lambda: tc.sum_all(tc.sigmoid(tc.add(x, w)))), [x]


TINY_NET = NetworkConfig(input_size=16, num_keypoints=3, base_channels=2, heatmap_sigma=1.0)


def posenet_loss_builder(rng, weights: LossWeights | None = None, config: NetworkConfig = TINY_NET):
    """Full network graph with all four loss terms on random data, float64."""
    model = PoseNet.create(config, seed=int(rng.integers(2**31))).astype(np.float64)
    # non-zero output layer so every path carries gradient
    model.params["reg_out.weight"].data[:] = rng.normal(size=model.params["reg_out.weight"].shape) * 0.1
    n, k = 2, config.num_keypoints
    images = rng.uniform(size=(n, 3, config.input_size, config.input_size))
    coords = rng.uniform(0.1, 0.9, size=(n, k, 2))
    vis = (rng.uniform(size=(n, k)) < 0.7).astype(float)
    targets = batch_targets(coords, vis, config.heatmap_size, config.heatmap_sigma)
    targets.heatmaps = targets.heatmaps.astype(np.float64)
    targets.offsets = targets.offsets.astype(np.float64)
    weights = weights or LossWeights(heatmap=1.0, offset=1.0, regression=1.0, visibility=1.0)

    def loss_fn():
        out = model.forward(images, heads=True)
        return total_loss(out, coords, vis, weights, targets).total

    return loss_fn, model


def _posenet(rng):
    loss_fn, model = posenet_loss_builder(rng)
    return loss_fn, model.parameters()


BUILDERS: dict[str, Callable] = {
    "conv2d": _conv,
    "upsample2x_nearest": _upsample,
    "relu": _relu,
    "sigmoid": _sigmoid,
    "add": _add,
    "concat_channels": _concat,
    "linear": _linear,
    "mse_loss_masked": _masked_mse,
    "bce_with_logits": _bce,
    "stop_gradient": _stop,
    "flatten_slice_scale": _slice_flatten_scale,
    "sum_all": _sum,
    "posenet": _posenet,
}


def run_check(name: str, seeds: int = 20, eps: float = 1e-5, per_param: int = 6) -> CheckOutcome:
    builder = BUILDERS[name]
    worst, checked, skipped = 0.0, 0, 0
    for seed in range(seeds):
        rng = np.random.default_rng([seed, 7])
        loss_fn, params = builder(rng)
        res = tc.grad_check(loss_fn, params, eps=eps, max_per_param=per_param, rng=rng)
        worst = max(worst, res.max_rel_error)
        checked += res.checked
        skipped += res.skipped_kinks
    return CheckOutcome(name, seeds, worst, checked, skipped)


def run_all(seeds: int = 20, eps: float = 1e-5) -> list[CheckOutcome]:
    return [run_check(name, seeds, eps) for name in BUILDERS]


def stopped_gradient_is_zero(seed: int = 0) -> bool:
    """A parameter reached only through stop_gradient gets an exact zero gradient."""
    rng = np.random.default_rng(seed)
    a = Parameter(rng.normal(size=(3, 3)))
    b = Parameter(rng.normal(size=(3, 3)))
    loss = tc.mse_loss(tc.add(a, tc.stop_gradient(tc.scale(b, 2.0))), np.zeros((3, 3)))
    grads = tc.backward(loss, [a, b])
    return bool(np.all(grads[1] == 0.0)) and bool(np.any(grads[0] != 0.0))


