from __future__ import annotations

import numpy as np

from .tensor import Parameter


class Adam:
    """Adam with bias correction.  State is a plain dict so it can be copied."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params: list[Parameter] = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = {
            "t": 0,
            "m": [np.zeros_like(p.data) for p in self.params],
            "v": [np.zeros_like(p.data) for p in self.params],
        }

    def step(self, grads=None) -> None:
        if grads is None:
            grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        adam_step(self.params, grads, self.lr, self.beta1, self.beta2, self.eps, self.state)


def adam_step(params, grads, lr, beta1, beta2, eps, state) -> None:
    state["t"] += 1
    t = state["t"]
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for p, g, m, v in zip(params, grads, state["m"], state["v"]):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        if lr == 0:
            continue
        update = (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.data.dtype)
        p.data -= update
