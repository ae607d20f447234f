"""Differentiable operations.  Each op computes its forward value with numpy
and registers a closure that pushes the output adjoint to its inputs."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, accumulate, as_tensor, make_node


class ShapeError(ValueError):
    pass


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError as exc:
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}") from exc

    def backward(g):
        accumulate(a, _unbroadcast(g, a.shape))
        accumulate(b, _unbroadcast(g, b.shape))

    return make_node(data, (a, b), backward, "add")


def scale(a: Tensor, k: float) -> Tensor:
    k = float(k)

    def backward(g):
        accumulate(a, g * k)

    return make_node(a.data * a.data.dtype.type(k), (a,), backward, "scale")


def sum_all(x: Tensor) -> Tensor:
    """Scalar sum of every element."""

    def backward(g):
        accumulate(x, np.broadcast_to(g, x.shape))

    return make_node(np.asarray(x.data.sum(), dtype=x.dtype), (x,), backward, "sum")


def total(terms) -> Tensor:
    """Sum of scalar tensors."""
    terms = list(terms)
    out = terms[0]
    for t in terms[1:]:
        out = add(out, t)
    return out


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    if _relu_trace is not None:
        _relu_trace.append(mask)

    def backward(g):
        accumulate(x, g * mask)

    return make_node(np.where(mask, x.data, 0).astype(x.dtype), (x,), backward, "relu")


# Set by the gradient checker to collect relu activation patterns.
_relu_trace: list | None = None


def _stable_sigmoid(z: np.ndarray) -> np.ndarray:
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(z.dtype)


def sigmoid(x: Tensor) -> Tensor:
    y = _stable_sigmoid(x.data)

    def backward(g):
        accumulate(x, g * y * (1 - y))

    return make_node(y, (x,), backward, "sigmoid")


# Set by the gradient checker: record stop_gradient values on the base pass and
# replay them as constants on perturbed passes.
_stop_record: list | None = None
_stop_replay: list | None = None


def stop_gradient(x: Tensor) -> Tensor:
    """Identity forward; the output never carries gradient back to ``x``."""
    data = x.data
    if _stop_replay is not None:
        data = _stop_replay.pop(0)
    elif _stop_record is not None:
        _stop_record.append(data.copy())
    out = Tensor(data)
    out.parents = (x,)
    out.op = "stop_gradient"
    return out


def flatten(x: Tensor) -> Tensor:
    shape = x.shape

    def backward(g):
        accumulate(x, g.reshape(shape))

    return make_node(x.data.reshape(shape[0], -1), (x,), backward, "flatten")


def slice_features(x: Tensor, start: int, stop: int) -> Tensor:
    """Columns ``start:stop`` of a 2-D tensor."""

    def backward(g):
        full = np.zeros_like(x.data)
        full[:, start:stop] = g
        accumulate(x, full)

    return make_node(x.data[:, start:stop], (x,), backward, "slice")


def concat_channels(tensors) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0].shape
    for t in tensors[1:]:
        if t.data.ndim != 4 or t.shape[0] != ref[0] or t.shape[2:] != ref[2:]:
            raise ShapeError(f"concat_channels: {t.shape} does not match {ref}")
    data = np.concatenate([t.data for t in tensors], axis=1)
    bounds = np.cumsum([0] + [t.shape[1] for t in tensors])

    def backward(g):
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            accumulate(t, g[:, lo:hi])

    return make_node(data, tensors, backward, "concat")


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight.T + bias`` with ``weight`` of shape (out, in)."""
    if x.data.ndim != 2 or weight.shape[1] != x.shape[1]:
        raise ShapeError(f"linear: input {x.shape} vs weight {weight.shape}")
    data = x.data @ weight.data.T
    if bias is not None:
        data = data + bias.data
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        if x.requires_grad:
            accumulate(x, g @ weight.data)
        if weight.requires_grad:
            accumulate(weight, g.T @ x.data)
        if bias is not None:
            accumulate(bias, g.sum(axis=0))

    return make_node(data, parents, backward, "linear")


def _same_padding(size: int, k: int, stride: int) -> tuple[int, int, int]:
    out = -(-size // stride)
    pad = max((out - 1) * stride + k - size, 0)
    return out, pad // 2, pad - pad // 2


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor | None = None, stride: int = 1) -> Tensor:
    """Cross-correlation with 'same' padding: output size is ceil(size / stride)."""
    if x.data.ndim != 4 or kernel.data.ndim != 4 or x.shape[1] != kernel.shape[1]:
        raise ShapeError(f"conv2d: input {x.shape} vs kernel {kernel.shape}")
    n, c, h, w = x.shape
    f, _, kh, kw = kernel.shape
    ho, pt, pb = _same_padding(h, kh, stride)
    wo, pl, pr = _same_padding(w, kw, stride)
    wmat = kernel.data.reshape(f, -1)
    span_h, span_w = stride * (ho - 1) + 1, stride * (wo - 1) + 1

    # columns laid out (C, kh, kw, N, Ho, Wo) so every copy is a block copy
    xt = x.data.transpose(1, 0, 2, 3)
    if pt or pb or pl or pr:
        xt = np.pad(xt, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    cols = np.empty((c, kh, kw, n, ho, wo), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, i, j] = xt[:, :, i : i + span_h : stride, j : j + span_w : stride]
    cols = cols.reshape(c * kh * kw, n * ho * wo)
    out = wmat @ cols
    if bias is not None:
        out += bias.data[:, None]
    data = np.ascontiguousarray(out.reshape(f, n, ho, wo).transpose(1, 0, 2, 3))
    parents = (x, kernel) if bias is None else (x, kernel, bias)

    def backward(g):
        gm = g.transpose(1, 0, 2, 3).reshape(f, -1)
        if kernel.requires_grad:
            accumulate(kernel, (gm @ cols.T).reshape(kernel.shape))
        if bias is not None and bias.requires_grad:
            accumulate(bias, gm.sum(axis=1))
        if not x.requires_grad:
            return
        dcols = (wmat.T @ gm).reshape(c, kh, kw, n, ho, wo)
        dxt = np.zeros((c, n, h + pt + pb, w + pl + pr), dtype=x.dtype)
        for i in range(kh):
            for j in range(kw):
                dxt[:, :, i : i + span_h : stride, j : j + span_w : stride] += dcols[:, i, j]
        accumulate(x, dxt[:, :, pt : pt + h, pl : pl + w].transpose(1, 0, 2, 3))

    return make_node(data, parents, backward, "conv2d")


def upsample2x_nearest(x: Tensor) -> Tensor:
    if x.data.ndim != 4:
        raise ShapeError(f"upsample2x_nearest needs NCHW input, got {x.shape}")
    n, c, h, w = x.shape
    data = np.broadcast_to(x.data[:, :, :, None, :, None], (n, c, h, 2, w, 2)).reshape(
        n, c, 2 * h, 2 * w
    )

    def backward(g):
        accumulate(x, g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)))

    return make_node(data, (x,), backward, "upsample2x")


def _mask_and_count(mask, shape, dtype):
    if mask is None:
        return None, float(np.prod(shape))
    m = np.broadcast_to(np.asarray(mask, dtype=dtype), shape)
    if np.any(m < 0) or np.any(m > 1):
        raise ValueError("loss mask values must lie in [0, 1]")
    return m, float(m.sum())


def mse_loss(pred: Tensor, target, mask=None) -> Tensor:
    """Mean squared error over the masked elements (zero if the mask is empty)."""
    target = np.asarray(target, dtype=pred.dtype)
    if target.shape != pred.shape:
        raise ShapeError(f"mse_loss: pred {pred.shape} vs target {target.shape}")
    m, count = _mask_and_count(mask, pred.shape, pred.dtype)
    diff = pred.data - target
    if count == 0:
        return make_node(np.zeros((), pred.dtype), (pred,), lambda g: None, "mse")
    sq = diff * diff if m is None else m * diff * diff
    data = np.asarray(sq.sum() / count, dtype=pred.dtype)

    def backward(g):
        grad = (2.0 / count) * diff
        if m is not None:
            grad = grad * m
        accumulate(pred, g * grad)

    return make_node(data, (pred,), backward, "mse")


def bce_with_logits(logits: Tensor, labels, mask=None) -> Tensor:
    """Binary cross-entropy on logits, averaged over the masked elements."""
    y = np.asarray(labels, dtype=logits.dtype)
    if y.shape != logits.shape:
        raise ShapeError(f"bce_with_logits: logits {logits.shape} vs labels {y.shape}")
    m, count = _mask_and_count(mask, logits.shape, logits.dtype)
    if count == 0:
        return make_node(np.zeros((), logits.dtype), (logits,), lambda g: None, "bce")
    z = logits.data
    per = np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))
    if m is not None:
        per = per * m
    data = np.asarray(per.sum() / count, dtype=logits.dtype)

    def backward(g):
        grad = (_stable_sigmoid(z) - y) / count
        if m is not None:
            grad = grad * m
        accumulate(logits, g * grad)

    return make_node(data, (logits,), backward, "bce")
