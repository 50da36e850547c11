"""Tensor and Workspace: dense row-major arrays with a tape recording every differentiable op."""
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable
import logging

import numpy as np

from ..misc.exceptions import ContractError, DimensionError, PrecisionError

DTYPES = {"f32": np.float32, "f64": np.float64}

logger = logging.getLogger(__name__)

@dataclass
class Node:
    """One recorded op: its inputs, its output and the rule mapping d(output) to d(inputs)."""
    op: str
    inputs: tuple
    output: "Tensor"
    backward: Callable[[np.ndarray], tuple]
    index: int

class Workspace():
    """
    Owns the precision and the tape of one computation graph.

    Precision is fixed at construction; a graph never mixes 32- and 64-bit tensors.
    A workspace is single-threaded; use one per thread.
    """

    def __init__(self, precision : str = "f32"):
        if precision not in DTYPES:
            raise PrecisionError(f"unknown precision {precision!r} (expected f32 or f64)")
        self.precision = precision
        self.dtype = DTYPES[precision]
        self.tape : list[Node] = []
        self._recording = True

    def tensor(self, data, requires_grad : bool = False, name : str | None = None) -> "Tensor":
        """Create a leaf tensor holding a copy of data in this workspace's precision."""
        return Tensor(np.array(data, dtype=self.dtype), self, requires_grad=requires_grad, name=name)

    def zeros(self, shape, requires_grad : bool = False, name : str | None = None) -> "Tensor":
        return Tensor(np.zeros(shape, dtype=self.dtype), self, requires_grad=requires_grad, name=name)

    def ones(self, shape, requires_grad : bool = False, name : str | None = None) -> "Tensor":
        return Tensor(np.ones(shape, dtype=self.dtype), self, requires_grad=requires_grad, name=name)

    @property
    def recording(self) -> bool:
        return self._recording

    @contextmanager
    def no_grad(self):
        """Run ops without recording them; outputs never require gradients."""
        previous = self._recording
        self._recording = False
        try:
            yield self
        finally:
            self._recording = previous

    def record(self, op : str, inputs : tuple, output : "Tensor", backward : Callable) -> None:
        node = Node(op=op, inputs=inputs, output=output, backward=backward, index=len(self.tape))
        self.tape.append(node)
        output.node = node

    def clear(self) -> None:
        """Drop the recorded graph. Leaves (parameters) and their grads are untouched."""
        for node in self.tape:
            node.output.node = None
        self.tape = []

    def __repr__(self) -> str:
        return f"Workspace(precision={self.precision}, nodes={len(self.tape)})"

class Tensor():
    """A dense n-dimensional array with optional gradient tracking."""

    __slots__ = ("data", "workspace", "requires_grad", "grad", "node", "name")

    def __init__(self, data : np.ndarray, workspace : Workspace, requires_grad : bool = False, name : str | None = None):
        if data.ndim == 0:
            data = data.reshape(1)
        if data.dtype != workspace.dtype:
            raise PrecisionError(f"{data.dtype} data in a {workspace.precision} workspace")
        if any(dim < 1 for dim in data.shape):
            raise DimensionError(f"shape {list(data.shape)} has a non-positive dimension")
        self.data = np.ascontiguousarray(data)
        self.workspace = workspace
        self.requires_grad = requires_grad
        self.grad : np.ndarray | None = None
        self.node : Node | None = None
        self.name = name

    @property
    def shape(self) -> list[int]:
        return list(self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return self.node is None

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on a tensor of shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        """A copy of the data, safe to hand to another thread."""
        return self.data.copy()

    def detach(self) -> "Tensor":
        """A copy of this tensor disconnected from the graph."""
        return Tensor(self.data.copy(), self.workspace, requires_grad=False, name=self.name)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        from .ops import backward
        backward(self)

    def __add__(self, other):
        from .ops import add
        return add(self, other)

    def __sub__(self, other):
        from .ops import sub
        return sub(self, other)

    def __mul__(self, other):
        from .ops import mul, scale
        return mul(self, other) if isinstance(other, Tensor) else scale(self, float(other))

    def __rmul__(self, other):
        from .ops import scale
        return scale(self, float(other))

    def __neg__(self):
        from .ops import scale
        return scale(self, -1.0)

    def __matmul__(self, other):
        from .ops import matmul
        return matmul(self, other)

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"Tensor({self.workspace.precision}{label} shape={self.shape}, requires_grad={self.requires_grad})"
