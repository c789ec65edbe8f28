"""
Central finite-difference check for tape gradients
"""
from typing import Callable, Sequence

import numpy as np

from diffcore.tensor import Tape, Tensor


def finite_difference_check(
    loss_fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    step: float = 1e-5,
    floor: float = 1e-6,
    numeric_factor: float = 1.0,
) -> float:
    """
    Compare reverse-mode gradients against central differences
    
    ``loss_fn`` must be deterministic (fix any dropout rng inside it) and
    return a 1x1 tensor. Tensors are perturbed in place and restored.
    
    Args:
        loss_fn: Builds the loss from the current tensor values
        tensors: Leaves to check; each must have requires_grad=True
        step: Finite-difference step
        floor: Denominator floor so near-zero gradients compare absolutely
        numeric_factor: Expected ratio of tape gradient to finite difference;
            -scale when a gradient reversal of ``scale`` sits between the
            leaves and the loss
        
    Returns:
        Maximum relative error over all checked entries
    """
    with Tape() as tape:
        loss = loss_fn()
    grads = tape.backward(loss)
    
    worst = 0.0
    for tensor in tensors:
        analytic = grads[tensor]
        for index in np.ndindex(*tensor.shape):
            original = tensor.data[index]
            tensor.data[index] = original + step
            plus = loss_fn().item()
            tensor.data[index] = original - step
            minus = loss_fn().item()
            tensor.data[index] = original
            numeric = numeric_factor * (plus - minus) / (2.0 * step)
            denom = max(abs(analytic[index]), abs(numeric), floor)
            worst = max(worst, abs(analytic[index] - numeric) / denom)
    return worst
