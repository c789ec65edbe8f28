"""
Tensor and Tape - dense float64 matrices with reverse-mode recording

Ops only record onto a tape while one is active (``with Tape() as tape:``)
and at least one operand requires a gradient. Outside a tape the same ops are
plain numpy computations, which is how inference and agent scoring run.
"""
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Tuple

import numpy as np

from errors import DimensionError, NonFiniteGradientError, TapeStateError


BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class Tensor:
    """Row-major 2-D float64 matrix; trainable when ``requires_grad`` is set"""
    
    __slots__ = ("data", "requires_grad", "grad", "name")
    
    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        array = np.array(data, dtype=np.float64)
        if array.ndim == 0:
            array = array.reshape(1, 1)
        elif array.ndim == 1:
            array = array.reshape(1, -1)
        elif array.ndim != 2:
            raise DimensionError(f"Tensor must be 2-D, got shape {array.shape}")
        self.data = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
    
    @classmethod
    def wrap(cls, array: np.ndarray, requires_grad: bool = False) -> "Tensor":
        """Wrap an existing 2-D float64 array without copying"""
        tensor = cls.__new__(cls)
        tensor.data = array
        tensor.requires_grad = requires_grad
        tensor.grad = None
        tensor.name = ""
        return tensor
    
    @property
    def rows(self) -> int:
        return self.data.shape[0]
    
    @property
    def cols(self) -> int:
        return self.data.shape[1]
    
    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape
    
    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])
    
    def numpy(self) -> np.ndarray:
        return self.data
    
    def __repr__(self):
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"
    
    def __matmul__(self, other):
        from diffcore.ops import matmul
        return matmul(self, other)
    
    def __add__(self, other):
        from diffcore.ops import add
        return add(self, other)
    
    def __mul__(self, other):
        from diffcore.ops import mul
        return mul(self, other)
    
    def __neg__(self):
        from diffcore.ops import neg
        return neg(self)


def parameter(data, name: str = "") -> Tensor:
    """Create a trainable leaf tensor"""
    return Tensor(data, requires_grad=True, name=name)


@dataclass
class TapeNode:
    """One recorded primitive: output, operands and the local backward rule"""
    op: str
    output: Tensor
    inputs: Tuple[Tensor, ...]
    backward: BackwardFn


class Gradients:
    """Gradients produced by one backward pass, keyed by tensor identity"""
    
    def __init__(self):
        self._slots: Dict[int, Tuple[Tensor, np.ndarray]] = {}
    
    def _set(self, tensor: Tensor, grad: np.ndarray):
        self._slots[id(tensor)] = (tensor, grad)
    
    def get(self, tensor: Tensor) -> Optional[np.ndarray]:
        entry = self._slots.get(id(tensor))
        return None if entry is None else entry[1]
    
    def __getitem__(self, tensor: Tensor) -> np.ndarray:
        grad = self.get(tensor)
        # Leaves the loss does not depend on get an exact zero gradient
        return np.zeros_like(tensor.data) if grad is None else grad
    
    def __contains__(self, tensor: Tensor) -> bool:
        return id(tensor) in self._slots
    
    def __len__(self) -> int:
        return len(self._slots)
    
    def tensors(self) -> Iterator[Tensor]:
        for tensor, _ in self._slots.values():
            yield tensor


_ACTIVE_TAPES: List[Optional["Tape"]] = []


def active_tape() -> Optional["Tape"]:
    """Return the innermost active tape, if any (None inside no_tape)"""
    return _ACTIVE_TAPES[-1] if _ACTIVE_TAPES else None


@contextmanager
def no_tape():
    """Suspend recording, e.g. for agent scoring in the middle of a step"""
    _ACTIVE_TAPES.append(None)
    try:
        yield
    finally:
        _ACTIVE_TAPES.pop()


class Tape:
    """
    Ordered record of primitive ops for one forward pass
    
    Recording order is a topological order of the computation, so replaying
    the nodes in reverse visits every consumer before its producer.
    """
    
    def __init__(self):
        self.nodes: List[TapeNode] = []
    
    def __enter__(self) -> "Tape":
        _ACTIVE_TAPES.append(self)
        return self
    
    def __exit__(self, exc_type, exc, tb):
        if _ACTIVE_TAPES and _ACTIVE_TAPES[-1] is self:
            _ACTIVE_TAPES.pop()
        return False
    
    def record(self, op: str, output: Tensor, inputs: Tuple[Tensor, ...], backward: BackwardFn):
        self.nodes.append(TapeNode(op=op, output=output, inputs=inputs, backward=backward))
    
    def backward(self, loss: Tensor) -> Gradients:
        """
        Propagate d(loss)/d(.) to every leaf that requires a gradient
        
        Args:
            loss: 1x1 tensor produced by an op recorded on this tape
            
        Returns:
            Gradients for all leaves (parameters and any input created with
            requires_grad=True); leaf ``.grad`` fields are overwritten
        """
        if not self.nodes:
            raise TapeStateError("backward called before any forward op was recorded")
        if loss.shape != (1, 1):
            raise TapeStateError(f"loss must be a 1x1 scalar, got {loss.shape}")
        produced = {id(node.output) for node in self.nodes}
        if id(loss) not in produced:
            raise TapeStateError("loss was not produced by an op on this tape")
        
        # Fresh slots on every pass
        slots: Dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
        leaves: Dict[int, Tensor] = {}
        
        for node in reversed(self.nodes):
            upstream = slots.pop(id(node.output), None)
            if upstream is None:
                continue
            local_grads = node.backward(upstream)
            for tensor, grad in zip(node.inputs, local_grads):
                if grad is None or not tensor.requires_grad:
                    continue
                if not np.all(np.isfinite(grad)):
                    raise NonFiniteGradientError(f"non-finite gradient flowing out of '{node.op}'")
                key = id(tensor)
                slots[key] = slots[key] + grad if key in slots else grad
                if key not in produced:
                    leaves[key] = tensor
        
        gradients = Gradients()
        for key, tensor in leaves.items():
            grad = slots[key]
            tensor.grad = grad
            gradients._set(tensor, grad)
        return gradients


def backward(tape: Tape, loss: Tensor) -> Gradients:
    """Run the reverse pass of ``tape`` from ``loss``"""
    return tape.backward(loss)


def zero_grad(tensors: Iterable[Tensor]):
    """Clear stored gradients"""
    for tensor in tensors:
        tensor.grad = None
