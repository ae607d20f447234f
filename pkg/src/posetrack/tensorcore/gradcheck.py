"""Central finite-difference verification of ``backward``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import ops
from .tensor import Tensor, backward


@dataclass
class GradCheckResult:
    max_rel_error: float
    max_abs_error: float
    checked: int
    skipped_kinks: int

    def passed(self, tol: float) -> bool:
        return self.checked > 0 and self.max_rel_error < tol


def _relu_pattern(fn: Callable[[], Tensor], stopped=None):
    ops._relu_trace = []
    ops._stop_replay = None if stopped is None else list(stopped)
    try:
        value = float(fn().data)
        pattern = ops._relu_trace
    finally:
        ops._relu_trace = None
        ops._stop_replay = None
    return value, pattern


def _record_stopped(fn: Callable[[], Tensor]):
    ops._stop_record = []
    try:
        fn()
        return ops._stop_record
    finally:
        ops._stop_record = None


def _same_pattern(a, b) -> bool:
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def grad_check(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    eps: float = 1e-5,
    max_per_param: int | None = None,
    rng: np.random.Generator | None = None,
    floor: float = 1e-7,
) -> GradCheckResult:
    """Compare analytic gradients of ``loss_fn()`` against central differences.

    ``loss_fn`` must rebuild the graph from the current parameter values.  Use
    float64 parameters.  Coordinates whose perturbation flips any relu
    activation are skipped, since the loss is not differentiable across the
    kink.  ``stop_gradient`` outputs are frozen at their unperturbed values
    during the perturbed passes, so the numeric derivative follows only the
    differentiable paths.  Relative error is ``|a - n| / max(|a|, |n|, floor)``.
    """
    rng = rng or np.random.default_rng(0)
    stopped = _record_stopped(loss_fn)
    _, base_pattern = _relu_pattern(loss_fn, stopped)
    analytic = [g.copy() for g in backward(loss_fn(), params)]

    max_rel = max_abs = 0.0
    checked = skipped = 0
    for p, g in zip(params, analytic):
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_per_param is not None and flat.size > max_per_param:
            idx = rng.choice(flat.size, size=max_per_param, replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + eps
            fp, pat_p = _relu_pattern(loss_fn, stopped)
            flat[i] = orig - eps
            fm, pat_m = _relu_pattern(loss_fn, stopped)
            flat[i] = orig
            if not (_same_pattern(base_pattern, pat_p) and _same_pattern(base_pattern, pat_m)):
                skipped += 1
                continue
            numeric = (fp - fm) / (2 * eps)
            a = float(g.reshape(-1)[i])
            err = abs(a - numeric)
            max_abs = max(max_abs, err)
            max_rel = max(max_rel, err / max(abs(a), abs(numeric), floor))
            checked += 1
    return GradCheckResult(max_rel, max_abs, checked, skipped)
