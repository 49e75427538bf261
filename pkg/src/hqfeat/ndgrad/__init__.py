from .engine import (
    ContractError,
    NumericalError,
    ShapeError,
    Tensor,
    add,
    as_array,
    concat,
    div,
    exp,
    gelu,
    getitem,
    leaky_relu,
    log,
    matmul,
    mean,
    mul,
    pad1d,
    relu,
    reshape,
    sigmoid,
    sqrt,
    sub,
    sum_,
    tanh,
    transpose,
)
from .functional import (
    affine,
    batch_norm,
    causal_mask,
    conv1d,
    conv1d_transpose,
    dropout,
    embedding,
    layer_norm,
    log_softmax,
    scaled_dot_attention,
    softmax,
    softplus,
    swap_last,
    take_along_last,
)
from .gradcheck import grad_check, relative_error

__all__ = [
    "Tensor", "ShapeError", "ContractError", "NumericalError", "as_array",
    "add", "sub", "mul", "div", "exp", "log", "sqrt", "relu", "leaky_relu",
    "tanh", "sigmoid", "gelu", "matmul", "sum_", "mean", "reshape",
    "transpose", "concat", "getitem", "pad1d", "affine", "softmax",
    "log_softmax", "softplus", "embedding", "take_along_last", "layer_norm", "batch_norm",
    "dropout", "conv1d", "conv1d_transpose", "causal_mask",
    "scaled_dot_attention", "swap_last", "grad_check", "relative_error",
]
