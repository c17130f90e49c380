"""Minimal dense-tensor compute layer with reverse-mode differentiation.

Everything is a thin wrapper over numpy arrays.  Ops record onto an
explicit gradient tape when one is active; with no active tape they are
plain numpy evaluations, which keeps inference allocation-flat.
"""

from .tensor import ShapeMismatch, Tape, Tensor, astensor
from .functional import (
    add,
    causal_conv1d,
    concat,
    cumsum,
    custom_op,
    div,
    einsum,
    exp,
    gelu,
    getitem,
    linear_scan,
    log,
    log_softmax,
    logsumexp,
    matmul,
    mean,
    mul,
    neg,
    power,
    reshape,
    rms_norm,
    sigmoid,
    silu,
    softmax,
    softplus,
    sub,
    tanh,
    tensor_sum,
    transpose,
    where,
)
from .gradcheck import NondeterministicFunction, fd_gradient_check

__all__ = [
    "Tensor", "Tape", "astensor", "ShapeMismatch",
    "add", "sub", "mul", "div", "neg", "power", "exp", "log", "tanh",
    "sigmoid", "silu", "gelu", "softplus", "matmul", "einsum",
    "tensor_sum", "mean", "logsumexp", "log_softmax", "softmax",
    "cumsum", "concat", "getitem", "reshape", "transpose", "where",
    "rms_norm", "causal_conv1d", "linear_scan", "custom_op",
    "fd_gradient_check", "NondeterministicFunction",
]
