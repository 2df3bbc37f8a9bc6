"""Minimal dense-tensor numeric core: taped reverse-mode gradients, Adam, checkpoints."""

from .tensor import (
    Tensor,
    Parameter,
    no_grad,
    set_default_dtype,
    get_default_dtype,
    add,
    mul,
    matmul,
    linear,
    concat,
    mean,
    tensor_sum,
    reshape,
    transpose,
    broadcast_to,
    index,
    elu,
    softmax,
    dropout,
    layer_norm,
    embedding,
    softmax_cross_entropy,
    zero_grads,
    collect_grads,
)
from .optim import AdamState, adam_step
from .gradcheck import GradCheckError, GradCheckReport, grad_check
from .checkpoint import save_checkpoint, load_checkpoint, CheckpointError

__all__ = [
    "Tensor",
    "Parameter",
    "no_grad",
    "set_default_dtype",
    "get_default_dtype",
    "add",
    "mul",
    "matmul",
    "linear",
    "concat",
    "mean",
    "tensor_sum",
    "reshape",
    "transpose",
    "broadcast_to",
    "index",
    "elu",
    "softmax",
    "dropout",
    "layer_norm",
    "embedding",
    "softmax_cross_entropy",
    "zero_grads",
    "collect_grads",
    "AdamState",
    "adam_step",
    "GradCheckError",
    "GradCheckReport",
    "grad_check",
    "save_checkpoint",
    "load_checkpoint",
    "CheckpointError",
]
