"""Dense reverse-mode differentiation substrate"""
from diffcore.tensor import Tensor, Tape, Gradients, parameter, backward, zero_grad, active_tape, no_tape
from diffcore.ops import (
    DEFAULT_LEAKY_SLOPE,
    matmul,
    add,
    mul,
    neg,
    leaky_relu,
    sigmoid,
    log,
    elementwise,
    add_bias,
    scale,
    sum_all,
    take_rows,
    gather,
    grl,
    dropout,
    softmax,
    stable_sigmoid,
    softmax_cross_entropy,
    binary_cross_entropy_with_logits,
    mean_squared_error,
)
from diffcore.optim import Adam, AdamState, adam_step
from diffcore.gradcheck import finite_difference_check

__all__ = [
    "Tensor",
    "Tape",
    "Gradients",
    "parameter",
    "backward",
    "zero_grad",
    "active_tape",
    "no_tape",
    "DEFAULT_LEAKY_SLOPE",
    "matmul",
    "add",
    "mul",
    "neg",
    "leaky_relu",
    "sigmoid",
    "log",
    "elementwise",
    "add_bias",
    "scale",
    "sum_all",
    "take_rows",
    "gather",
    "grl",
    "dropout",
    "softmax",
    "stable_sigmoid",
    "softmax_cross_entropy",
    "binary_cross_entropy_with_logits",
    "mean_squared_error",
    "Adam",
    "AdamState",
    "adam_step",
    "finite_difference_check",
]
