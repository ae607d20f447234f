from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

_GRAD_ENABLED = True
_DEBUG_FINITE = False


class GraphError(RuntimeError):
    pass


@contextlib.contextmanager
def no_grad():
    global _GRAD_ENABLED
    prev, _GRAD_ENABLED = _GRAD_ENABLED, False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


@contextlib.contextmanager
def check_finite():
    """Raise on the first op producing NaN or Inf."""
    global _DEBUG_FINITE
    prev, _DEBUG_FINITE = _DEBUG_FINITE, True
    try:
        yield
    finally:
        _DEBUG_FINITE = prev


class Tensor:
    """A node in the differentiation graph.

    ``parents`` always records the op inputs; ``requires_grad`` decides whether
    the backward pass visits the node at all.
    """

    __slots__ = ("data", "grad", "requires_grad", "parents", "backward_fn", "op", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.parents: tuple[Tensor, ...] = ()
        self.backward_fn: Callable[[np.ndarray], None] | None = None
        self.op = "leaf"
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(op={self.op}, shape={self.shape}, dtype={self.dtype})"

    def __add__(self, other):
        from .ops import add

        return add(self, other)

    __radd__ = __add__

    def __mul__(self, k):
        from .ops import scale

        return scale(self, k)

    __rmul__ = __mul__


class Parameter(Tensor):
    __slots__ = ()

    def __init__(self, data, name: str | None = None):
        super().__init__(np.array(data), requires_grad=True, name=name)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make_node(
    data: np.ndarray,
    parents: Sequence[Tensor],
    backward_fn: Callable[[np.ndarray], None],
    op: str,
) -> Tensor:
    if _DEBUG_FINITE and not np.all(np.isfinite(data)):
        raise FloatingPointError(f"non-finite output from {op}")
    needs = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=needs)
    out.op = op
    if needs:
        out.parents = tuple(parents)
        out.backward_fn = backward_fn
    return out


def accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=t.data.dtype, copy=True)
    else:
        t.grad += g


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor, params: Iterable[Parameter] | None = None) -> list[np.ndarray] | None:
    """Reverse-mode accumulation from a scalar ``loss``.

    Parameter gradients are reset before accumulation.  When ``params`` is
    given, their gradients are returned in order, with exact zeros for
    parameters the loss does not reach through differentiable paths.
    """
    if loss.data.size != 1:
        raise GraphError(f"backward needs a scalar loss, got shape {loss.shape}")
    params = list(params) if params is not None else None
    if params is not None:
        for p in params:
            p.grad = None
    if loss.requires_grad:
        order = _topo_order(loss)
        for node in order:
            node.grad = None
        loss.grad = np.ones_like(loss.data)
        for node in reversed(order):
            if node.backward_fn is not None and node.grad is not None:
                node.backward_fn(node.grad)
                if node.parents:
                    node.grad = None
    if params is None:
        return None
    out = []
    for p in params:
        if p.grad is None:
            p.grad = np.zeros_like(p.data)
        out.append(p.grad)
    return out
