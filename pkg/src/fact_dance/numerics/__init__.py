from .ftns import FormatError, read_tensor, write_tensor
from .gradcheck import grad_check
from .optim import PAPER_SCHEDULE, AdamState, TrainingDivergenceError, adam_step
from .tensor import (
    DegenerateMaskError,
    DimensionError,
    NonFiniteError,
    Tensor,
    add,
    concat,
    layer_norm,
    linear_forward,
    matmul,
    mean_squared_error,
    mul,
    multi_head_attention,
    no_grad,
    relu,
    reshape,
    scale,
    softmax_masked,
    sub,
    sum_all,
    take,
    transpose,
)

__all__ = [
    "AdamState",
    "DegenerateMaskError",
    "DimensionError",
    "FormatError",
    "NonFiniteError",
    "PAPER_SCHEDULE",
    "Tensor",
    "TrainingDivergenceError",
    "adam_step",
    "add",
    "concat",
    "grad_check",
    "layer_norm",
    "linear_forward",
    "matmul",
    "mean_squared_error",
    "mul",
    "multi_head_attention",
    "no_grad",
    "read_tensor",
    "relu",
    "reshape",
    "scale",
    "softmax_masked",
    "sub",
    "sum_all",
    "take",
    "transpose",
    "write_tensor",
]
