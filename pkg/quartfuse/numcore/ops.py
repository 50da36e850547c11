"""
Differentiable ops over Tensors and the reverse-mode backward pass.

Every op checks shapes explicitly; there is no broadcasting apart from scale()
(scalar times tensor) and the explicit row-wise add_bias(). Each op registers its
gradient rule with the workspace tape when any input requires a gradient.
"""
from typing import Sequence
import logging

import numpy as np

from ..misc.exceptions import ContractError, DimensionError, DomainError, InputError, PrecisionError
from .tensor import Tensor, Workspace

logger = logging.getLogger(__name__)

def _workspace_of(inputs : Sequence[Tensor]) -> Workspace:
    workspace = inputs[0].workspace
    for t in inputs[1:]:
        if t.workspace is not workspace:
            if t.workspace.precision != workspace.precision:
                raise PrecisionError(f"cannot combine {workspace.precision} and {t.workspace.precision} tensors in one graph")
            raise ContractError("tensors from different workspaces cannot share a graph")
    return workspace

def _result(op : str, data : np.ndarray, inputs : tuple, backward) -> Tensor:
    workspace = _workspace_of(inputs)
    if not np.all(np.isfinite(data)):
        raise DomainError(f"{op} produced non-finite values")
    out = Tensor(np.asarray(data, dtype=workspace.dtype), workspace)
    if workspace.recording and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        workspace.record(op, inputs, out, backward)
    return out

def _same_shape(op : str, a : Tensor, b : Tensor) -> None:
    if a.data.shape != b.data.shape:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ")

def _axis(op : str, x : Tensor, axis : int) -> int:
    if not -x.data.ndim <= axis < x.data.ndim:
        raise DimensionError(f"{op}: axis {axis} invalid for shape {x.shape}")
    return axis % x.data.ndim

################################################################################
# Linear algebra
################################################################################

def matmul(a : Tensor, b : Tensor) -> Tensor:
    """Matrix product of a (m×k) and b (k×n)."""
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} do not chain")
    a_data, b_data = a.data, b.data
    return _result("matmul", a_data @ b_data, (a, b), lambda g: (g @ b_data.T, a_data.T @ g))

def transpose(x : Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise DimensionError(f"transpose: expected a matrix, got shape {x.shape}")
    return _result("transpose", x.data.T, (x,), lambda g: (g.T,))

################################################################################
# Elementwise
################################################################################

def add(a : Tensor, b : Tensor) -> Tensor:
    _same_shape("add", a, b)
    return _result("add", a.data + b.data, (a, b), lambda g: (g, g))

def sub(a : Tensor, b : Tensor) -> Tensor:
    _same_shape("sub", a, b)
    return _result("sub", a.data - b.data, (a, b), lambda g: (g, -g))

def mul(a : Tensor, b : Tensor) -> Tensor:
    """Elementwise product of two same-shape tensors."""
    _same_shape("mul", a, b)
    a_data, b_data = a.data, b.data
    return _result("mul", a_data * b_data, (a, b), lambda g: (g * b_data, g * a_data))

def scale(x : Tensor, factor : float) -> Tensor:
    """Scalar times tensor."""
    factor = x.workspace.dtype(factor)
    return _result("scale", x.data * factor, (x,), lambda g: (g * factor,))

def add_bias(x : Tensor, bias : Tensor) -> Tensor:
    """Add a bias row (n,) to every row of x (m×n)."""
    if x.data.ndim != 2 or bias.data.shape not in ((x.data.shape[1],), (1, x.data.shape[1])):
        raise DimensionError(f"add_bias: bias {bias.shape} does not fit rows of {x.shape}")
    bias_shape = bias.data.shape
    return _result("add_bias", x.data + bias.data.reshape(1, -1), (x, bias),
                   lambda g: (g, g.sum(axis=0).reshape(bias_shape)))

def log(x : Tensor) -> Tensor:
    if np.any(x.data <= 0):
        raise DomainError(f"log: input has {int(np.sum(x.data <= 0))} value(s) <= 0")
    x_data = x.data
    return _result("log", np.log(x_data), (x,), lambda g: (g / x_data,))

def exp(x : Tensor) -> Tensor:
    out = np.exp(x.data)
    return _result("exp", out, (x,), lambda g: (g * out,))

def relu(x : Tensor) -> Tensor:
    positive = x.data > 0
    return _result("relu", np.where(positive, x.data, 0), (x,), lambda g: (g * positive,))

def xlogx(x : Tensor) -> Tensor:
    """x·log x elementwise with the convention 0·log 0 = 0."""
    if np.any(x.data < 0):
        raise DomainError("xlogx: input has negative values")
    x_data = x.data
    positive = x_data > 0
    safe = np.where(positive, x_data, 1)
    out = np.where(positive, x_data * np.log(safe), 0)
    return _result("xlogx", out, (x,), lambda g: (g * np.where(positive, np.log(safe) + 1, 0),))

################################################################################
# Reductions
################################################################################

def _expand(g : np.ndarray, shape : tuple, axis : int | None, keepdims : bool) -> np.ndarray:
    if axis is None:
        return np.broadcast_to(g.reshape(-1)[0], shape)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)

def sum(x : Tensor, axis : int | None = None, keepdims : bool = False) -> Tensor:  # pylint: disable=redefined-builtin
    """Sum over one axis, or over everything (shape [1]) when axis is None."""
    shape = x.data.shape
    if axis is None:
        out = np.array([x.data.sum()])
    else:
        axis = _axis("sum", x, axis)
        out = x.data.sum(axis=axis, keepdims=keepdims)
    return _result("sum", out, (x,), lambda g: (_expand(g, shape, axis, keepdims).copy(),))

def mean(x : Tensor, axis : int | None = None, keepdims : bool = False) -> Tensor:
    shape = x.data.shape
    if axis is None:
        count = x.data.size
        out = np.array([x.data.mean()])
    else:
        axis = _axis("mean", x, axis)
        count = shape[axis]
        out = x.data.mean(axis=axis, keepdims=keepdims)
    return _result("mean", out, (x,), lambda g: (_expand(g, shape, axis, keepdims) / count,))

def max(x : Tensor, axis : int, keepdims : bool = False) -> Tensor:  # pylint: disable=redefined-builtin
    """Maximum over one axis; the gradient flows to the first maximal entry."""
    axis = _axis("max", x, axis)
    shape = x.data.shape
    winners = np.argmax(x.data, axis=axis)
    out = np.take_along_axis(x.data, np.expand_dims(winners, axis), axis=axis)
    if not keepdims:
        out = np.squeeze(out, axis=axis)

    def backward(g):
        grad = np.zeros(shape, dtype=g.dtype)
        np.put_along_axis(grad, np.expand_dims(winners, axis), g if keepdims else np.expand_dims(g, axis), axis=axis)
        return (grad,)
    return _result("max", out, (x,), backward)

################################################################################
# Normalisations
################################################################################

def softmax(x : Tensor, axis : int = -1, mask : np.ndarray | None = None) -> Tensor:
    """
    Softmax along axis with max-subtraction.

    mask (same shape as x, True = keep) gives masked entries a logit of -inf:
    their output is exactly 0 and they receive no gradient.
    """
    axis = _axis("softmax", x, axis)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != x.data.shape:
            raise DimensionError(f"softmax: mask {list(mask.shape)} does not match {x.shape}")
        if not np.all(mask.any(axis=axis)):
            raise ContractError("softmax: a slice has every entry masked")
        logits = np.where(mask, x.data, -np.inf)
    else:
        logits = x.data
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)
    return _result("softmax", out, (x,), lambda g: (out * (g - (g * out).sum(axis=axis, keepdims=True)),))

def log_softmax(x : Tensor, axis : int = -1) -> Tensor:
    axis = _axis("log_softmax", x, axis)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    probs = np.exp(out)
    return _result("log_softmax", out, (x,), lambda g: (g - probs * g.sum(axis=axis, keepdims=True),))

def layer_norm(x : Tensor, gain : Tensor, bias : Tensor, eps : float = 1e-5) -> Tensor:
    """Row-wise layer normalisation of x (m×n) with gain and bias of shape (n,)."""
    n = x.data.shape[-1]
    if x.data.ndim != 2 or gain.data.shape != (n,) or bias.data.shape != (n,):
        raise DimensionError(f"layer_norm: x {x.shape}, gain {gain.shape}, bias {bias.shape}")
    mu = x.data.mean(axis=1, keepdims=True)
    centred = x.data - mu
    inv_std = 1.0 / np.sqrt((centred ** 2).mean(axis=1, keepdims=True) + eps)
    normed = centred * inv_std
    gain_data = gain.data

    def backward(g):
        g_normed = g * gain_data
        g_x = inv_std * (g_normed - g_normed.mean(axis=1, keepdims=True)
                         - normed * (g_normed * normed).mean(axis=1, keepdims=True))
        return (g_x, (g * normed).sum(axis=0), g.sum(axis=0))
    return _result("layer_norm", normed * gain_data + bias.data, (x, gain, bias), backward)

################################################################################
# Structural
################################################################################

def concat(tensors : Sequence[Tensor], axis : int = 0) -> Tensor:
    tensors = tuple(tensors)
    if not tensors:
        raise DimensionError("concat: nothing to concatenate")
    ndim = tensors[0].data.ndim
    axis = _axis("concat", tensors[0], axis)
    for t in tensors[1:]:
        if t.data.ndim != ndim or any(t.data.shape[d] != tensors[0].data.shape[d] for d in range(ndim) if d != axis):
            raise DimensionError(f"concat: shapes {[t.shape for t in tensors]} disagree off axis {axis}")
    bounds = np.cumsum([t.data.shape[axis] for t in tensors])[:-1]
    return _result("concat", np.concatenate([t.data for t in tensors], axis=axis), tensors,
                   lambda g: tuple(np.split(g, bounds, axis=axis)))

def slice(x : Tensor, axis : int, start : int, stop : int) -> Tensor:  # pylint: disable=redefined-builtin
    """Contiguous slice [start, stop) along one axis."""
    axis = _axis("slice", x, axis)
    if not 0 <= start < stop <= x.data.shape[axis]:
        raise DimensionError(f"slice: [{start}, {stop}) outside axis {axis} of {x.shape}")
    index = tuple(np.s_[start:stop] if d == axis else np.s_[:] for d in range(x.data.ndim))
    shape = x.data.shape

    def backward(g):
        grad = np.zeros(shape, dtype=g.dtype)
        grad[index] = g
        return (grad,)
    return _result("slice", x.data[index], (x,), backward)

def embedding_lookup(table : Tensor, indices : Sequence[int]) -> Tensor:
    """Rows of table (V×E) at integer indices, shape (len(indices)×E)."""
    indices = np.asarray(list(indices), dtype=np.int64)
    if table.data.ndim != 2:
        raise DimensionError(f"embedding_lookup: table must be a matrix, got {table.shape}")
    if indices.size == 0:
        raise InputError("embedding_lookup: no indices")
    if np.any(indices < 0) or np.any(indices >= table.data.shape[0]):
        raise InputError(f"embedding_lookup: index outside vocabulary of {table.data.shape[0]}")
    shape = table.data.shape

    def backward(g):
        grad = np.zeros(shape, dtype=g.dtype)
        np.add.at(grad, indices, g)
        return (grad,)
    return _result("embedding_lookup", table.data[indices], (table,), backward)

################################################################################
# Reverse pass
################################################################################

def backward(loss : Tensor) -> None:
    """
    Accumulate d(loss)/d(leaf) into .grad of every requires_grad leaf the loss depends on.

    Gradients accumulate additively across calls; zero them between steps.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ContractError("backward: loss does not depend on any tensor that requires a gradient")

    if loss.node is None:
        _accumulate(loss, np.ones_like(loss.data))
        return

    tape = loss.workspace.tape
    pending = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape[:loss.node.index + 1]):
        g = pending.pop(id(node.output), None)
        if g is None:
            continue
        for inp, grad in zip(node.inputs, node.backward(g)):
            if grad is None or not inp.requires_grad:
                continue
            if inp.node is None:
                _accumulate(inp, grad)
            elif id(inp) in pending:
                pending[id(inp)] = pending[id(inp)] + grad
            else:
                pending[id(inp)] = grad

def _accumulate(leaf : Tensor, grad : np.ndarray) -> None:
    grad = np.asarray(grad, dtype=leaf.workspace.dtype).reshape(leaf.data.shape)
    leaf.grad = grad.copy() if leaf.grad is None else leaf.grad + grad
