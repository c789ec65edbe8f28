"""
Adam with L2 weight decay
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from diffcore.tensor import Tensor
from errors import CheckpointError, DimensionError, NonFiniteGradientError


@dataclass
class AdamState:
    """First/second moments and step counts, aligned with the parameter list"""
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)
    steps: List[int] = field(default_factory=list)
    
    @classmethod
    def for_params(cls, params: Sequence[Tensor]) -> "AdamState":
        return cls(
            m=[np.zeros_like(p.data) for p in params],
            v=[np.zeros_like(p.data) for p in params],
            steps=[0 for _ in params],
        )


def adam_step(
    params: Sequence[Tensor],
    grads: Sequence[Optional[np.ndarray]],
    state: AdamState,
    lr: float,
    betas: Tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    weight_decay: float = 1e-7,
    names: Optional[Sequence[str]] = None,
):
    """
    Apply one Adam update in place
    
    Parameters whose gradient is None were not touched by the loss and are
    skipped entirely (no decay, no moment update).
    
    Raises:
        DimensionError: params, grads and state disagree in length or shape
        NonFiniteGradientError: a gradient contains NaN/Inf
    """
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise DimensionError("adam_step: params, grads and optimizer state differ in length")
    beta1, beta2 = betas
    
    for i, (param, grad) in enumerate(zip(params, grads)):
        if grad is None:
            continue
        label = names[i] if names else (param.name or f"#{i}")
        if grad.shape != param.data.shape or state.m[i].shape != param.data.shape:
            raise DimensionError(f"adam_step: shape mismatch for parameter {label}")
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradientError(f"non-finite gradient for parameter {label}")
        
        g = grad + weight_decay * param.data if weight_decay else grad
        state.steps[i] += 1
        t = state.steps[i]
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * (g * g)
        m_hat = state.m[i] / (1.0 - beta1 ** t)
        v_hat = state.v[i] / (1.0 - beta2 ** t)
        param.data -= lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    """Adam optimizer over a fixed list of parameters"""
    
    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 1e-3,
        betas: Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 1e-7,
    ):
        self.params = list(params)
        self.lr = lr
        self.betas = tuple(betas)
        self.eps = eps
        self.weight_decay = weight_decay
        self.state = AdamState.for_params(self.params)
    
    def set_lr(self, lr: float):
        self.lr = lr
    
    def zero_grad(self):
        for param in self.params:
            param.grad = None
    
    def step(self):
        adam_step(
            self.params,
            [p.grad for p in self.params],
            self.state,
            self.lr,
            betas=self.betas,
            eps=self.eps,
            weight_decay=self.weight_decay,
        )
    
    def state_dict(self) -> Dict[str, np.ndarray]:
        arrays = {"steps": np.asarray(self.state.steps, dtype=np.int64), "lr": np.asarray(self.lr)}
        for i, (m, v) in enumerate(zip(self.state.m, self.state.v)):
            arrays[f"m.{i}"] = m.copy()
            arrays[f"v.{i}"] = v.copy()
        return arrays
    
    def load_state_dict(self, arrays: Dict[str, np.ndarray]):
        steps = arrays.get("steps")
        if steps is None or len(steps) != len(self.params):
            raise CheckpointError("optimizer state does not match parameter count")
        self.state = AdamState(
            m=[np.array(arrays[f"m.{i}"]) for i in range(len(self.params))],
            v=[np.array(arrays[f"v.{i}"]) for i in range(len(self.params))],
            steps=[int(s) for s in steps],
        )
        self.lr = float(arrays["lr"])
