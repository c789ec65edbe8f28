"""
Differentiable primitives over Tensor

Every op computes its numpy value eagerly and, when a tape is active and an
operand requires a gradient, records its local derivative on that tape.
"""
from typing import Optional, Sequence

import numpy as np

from diffcore.tensor import Tensor, active_tape
from errors import ConfigError, DimensionError, DomainError, LabelIndexError


DEFAULT_LEAKY_SLOPE = 0.01


def _result(op: str, value: np.ndarray, inputs, backward) -> Tensor:
    if not np.all(np.isfinite(value)):
        raise DomainError(f"{op} produced non-finite values")
    tape = active_tape()
    track = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor.wrap(value, requires_grad=track)
    if track:
        tape.record(op, out, tuple(inputs), backward)
    return out


def _same_shape(op: str, a: Tensor, b: Tensor):
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def stable_sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function without overflow for large |x|"""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, max-subtracted"""
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.cols != b.rows:
        raise DimensionError(f"matmul: {a.shape} x {b.shape}")
    a_data, b_data = a.data, b.data
    
    def backward(g):
        return g @ b_data.T, a_data.T @ g
    
    return _result("matmul", a_data @ b_data, (a, b), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("add", a, b)
    return _result("add", a.data + b.data, (a, b), lambda g: (g, g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("mul", a, b)
    a_data, b_data = a.data, b.data
    return _result("mul", a_data * b_data, (a, b), lambda g: (g * b_data, g * a_data))


def neg(a: Tensor) -> Tensor:
    return _result("neg", -a.data, (a,), lambda g: (-g,))


def leaky_relu(a: Tensor, slope: float = DEFAULT_LEAKY_SLOPE) -> Tensor:
    x = a.data
    local = np.where(x > 0, 1.0, slope)
    return _result("leaky_relu", x * local, (a,), lambda g: (g * local,))


def sigmoid(a: Tensor) -> Tensor:
    s = stable_sigmoid(a.data)
    return _result("sigmoid", s, (a,), lambda g: (g * s * (1.0 - s),))


def log(a: Tensor) -> Tensor:
    x = a.data
    if np.any(x <= 0):
        raise DomainError("log of non-positive input")
    return _result("log", np.log(x), (a,), lambda g: (g / x,))


_ELEMENTWISE = {
    "add": add,
    "mul": mul,
    "neg": neg,
    "leaky_relu": leaky_relu,
    "sigmoid": sigmoid,
    "log": log,
}


def elementwise(op: str, *inputs: Tensor, slope: Optional[float] = None) -> Tensor:
    """
    Dispatch an elementwise op by name
    
    Args:
        op: One of add, mul, neg, leaky_relu, sigmoid, log
        inputs: Operands (two for add/mul, one otherwise)
        slope: LeakyReLU negative slope (default 0.01)
    """
    fn = _ELEMENTWISE.get(op)
    if fn is None:
        raise ConfigError(f"unknown elementwise op '{op}'")
    if op == "leaky_relu" and slope is not None:
        return leaky_relu(*inputs, slope=slope)
    return fn(*inputs)


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    """Add a 1 x m row to every row of an n x m tensor"""
    if bias.rows != 1 or bias.cols != x.cols:
        raise DimensionError(f"add_bias: {x.shape} + {bias.shape}")
    return _result(
        "add_bias",
        x.data + bias.data,
        (x, bias),
        lambda g: (g, g.sum(axis=0, keepdims=True)),
    )


def scale(x: Tensor, factor: float) -> Tensor:
    return _result("scale", x.data * factor, (x,), lambda g: (g * factor,))


def sum_all(x: Tensor) -> Tensor:
    shape = x.shape
    return _result(
        "sum_all",
        np.array([[x.data.sum()]]),
        (x,),
        lambda g: (np.full(shape, g[0, 0]),),
    )


def take_rows(x: Tensor, rows: Sequence[int]) -> Tensor:
    """Gather rows by index; gradients scatter-add back"""
    index = np.asarray(rows, dtype=np.int64)
    shape = x.shape
    
    def backward(g):
        grad = np.zeros(shape)
        np.add.at(grad, index, g)
        return (grad,)
    
    return _result("take_rows", x.data[index], (x,), backward)


def gather(x: Tensor, columns: Sequence[int]) -> Tensor:
    """Pick column ``columns[i]`` from row i, giving an n x 1 tensor"""
    cols = np.asarray(columns, dtype=np.int64)
    if cols.shape != (x.rows,):
        raise DimensionError(f"gather: need {x.rows} column indices, got {cols.shape}")
    if np.any(cols < 0) or np.any(cols >= x.cols):
        raise LabelIndexError(f"gather: column index out of range [0, {x.cols})")
    row_index = np.arange(x.rows)
    shape = x.shape
    
    def backward(g):
        grad = np.zeros(shape)
        grad[row_index, cols] = g[:, 0]
        return (grad,)
    
    return _result("gather", x.data[row_index, cols].reshape(-1, 1), (x,), backward)


def grl(x: Tensor, scale: float = 1.0) -> Tensor:
    """Gradient reversal: identity forward, gradient times -scale backward"""
    if scale < 0:
        raise ConfigError(f"grl scale must be >= 0, got {scale}")
    factor = -scale
    return _result("grl", x.data.copy(), (x,), lambda g: (factor * g,))


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout with a mask drawn from ``rng``"""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return x
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _result("dropout", x.data * mask, (x,), lambda g: (g * mask,))


def _check_labels(labels: Sequence[int], n: int, num_classes: int) -> np.ndarray:
    index = np.asarray(labels, dtype=np.int64).reshape(-1)
    if index.shape != (n,):
        raise DimensionError(f"expected {n} labels, got {index.shape[0]}")
    if np.any(index < 0) or np.any(index >= num_classes):
        raise LabelIndexError(f"label out of range [0, {num_classes})")
    return index


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """
    Sum over rows of -log(softmax(logits)[label])
    
    Args:
        logits: n x C tensor (n = 1 for a single segment)
        labels: int or sequence of n class indices
    """
    if np.isscalar(labels):
        labels = [labels]
    index = _check_labels(labels, logits.rows, logits.cols)
    z = logits.data
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(logits.rows)
    loss = float(np.sum(log_norm - shifted[rows, index]))
    
    def backward(g):
        grad = softmax(z)
        grad[rows, index] -= 1.0
        return (g[0, 0] * grad,)
    
    return _result("softmax_cross_entropy", np.array([[loss]]), (logits,), backward)


def binary_cross_entropy_with_logits(logits: Tensor, targets) -> Tensor:
    """Sum of BCE(sigmoid(logit), target) over an n x 1 column of logits"""
    if logits.cols != 1:
        raise DimensionError(f"expected n x 1 logits, got {logits.shape}")
    y = np.asarray(targets, dtype=np.float64).reshape(-1, 1)
    if y.shape != logits.shape:
        raise DimensionError(f"expected {logits.rows} targets, got {y.shape[0]}")
    x = logits.data
    loss = float(np.sum(np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))))
    
    def backward(g):
        return (g[0, 0] * (stable_sigmoid(x) - y),)
    
    return _result("bce_with_logits", np.array([[loss]]), (logits,), backward)


def mean_squared_error(pred: Tensor, target) -> Tensor:
    """Mean of (pred - target)^2; ``target`` is a constant"""
    y = np.asarray(target, dtype=np.float64).reshape(pred.shape)
    diff = pred.data - y
    n = diff.size
    return _result(
        "mse",
        np.array([[float(np.mean(diff ** 2))]]),
        (pred,),
        lambda g: (g[0, 0] * 2.0 * diff / n,),
    )
