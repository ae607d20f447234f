"""Minimal dense reverse-mode autodiff over numpy arrays."""

from .tensor import Parameter, Tensor, backward, no_grad, is_grad_enabled, as_tensor
from .ops import (
    add,
    bce_with_logits,
    concat_channels,
    conv2d,
    flatten,
    linear,
    mse_loss,
    relu,
    scale,
    sigmoid,
    slice_features,
    stop_gradient,
    sum_all,
    total,
    upsample2x_nearest,
)
from .optim import Adam
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import GradCheckResult, grad_check

__all__ = [
    "Adam",
    "CheckpointError",
    "GradCheckResult",
    "Parameter",
    "Tensor",
    "add",
    "as_tensor",
    "backward",
    "bce_with_logits",
    "concat_channels",
    "conv2d",
    "flatten",
    "grad_check",
    "is_grad_enabled",
    "linear",
    "load_checkpoint",
    "mse_loss",
    "no_grad",
    "relu",
    "save_checkpoint",
    "scale",
    "sigmoid",
    "slice_features",
    "stop_gradient",
    "sum_all",
    "total",
    "upsample2x_nearest",
]
