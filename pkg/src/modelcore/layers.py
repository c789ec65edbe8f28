"""
Fully connected layer built on diffcore
"""
import math
from typing import List

import numpy as np

from diffcore import Tensor, add_bias, matmul, parameter


class Linear:
    """y = x W + b, weights drawn uniform in +-1/sqrt(fan_in)"""
    
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, name: str):
        bound = 1.0 / math.sqrt(in_dim)
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = parameter(rng.uniform(-bound, bound, (in_dim, out_dim)), name=f"{name}.weight")
        self.bias = parameter(rng.uniform(-bound, bound, (1, out_dim)), name=f"{name}.bias")
    
    def __call__(self, x: Tensor) -> Tensor:
        return add_bias(matmul(x, self.weight), self.bias)
    
    def parameters(self) -> List[Tensor]:
        return [self.weight, self.bias]
