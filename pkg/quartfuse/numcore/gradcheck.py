"""Central finite-difference oracle for reverse-mode gradients."""
from typing import Callable, Sequence
import logging

import numpy as np

from ..misc.exceptions import ContractError, DomainError, EvaluationError, PrecisionError
from ..misc.seeds import rng_for
from .ops import backward
from .tensor import Tensor

logger = logging.getLogger(__name__)

EPS_RANGE = (1e-7, 1e-3)

def numeric_grad(f : Callable[[], Tensor], param : Tensor, eps : float = 1e-6, indices : np.ndarray | None = None) -> np.ndarray:
    """
    Central differences (f(θ + eps·e_i) − f(θ − eps·e_i)) / (2·eps) for every coordinate of param,
    or only at the flat indices given (the rest stay zero).

    param.data is perturbed in place and restored exactly; f must be deterministic.
    """
    workspace = param.workspace
    flat = param.data.reshape(-1)
    grad = np.zeros(flat.size, dtype=np.float64)
    with workspace.no_grad():
        for i in (range(flat.size) if indices is None else indices):
            original = flat[i]
            flat[i] = original + eps
            plus = _evaluate(f)
            flat[i] = original - eps
            minus = _evaluate(f)
            flat[i] = original
            grad[i] = (plus - minus) / (2 * eps)
    return grad.reshape(param.data.shape)

def grad_check(f : Callable[[], Tensor], params : Sequence[Tensor], eps : float = 1e-6, entries : int | None = None, seed : int = 0) -> float:
    """
    Compare reverse-mode gradients of f against central differences.

    Returns max over the checked coordinates of |analytic − numeric| / max(1, |numeric|).
    With entries, at most that many coordinates per tensor are checked, drawn from seed.
    Must run in 64-bit precision. Leaves the analytic gradients in params' .grad.
    """
    params = list(params)
    if not params:
        raise ContractError("grad_check: no parameters to check")
    if not EPS_RANGE[0] <= eps <= EPS_RANGE[1]:
        raise ContractError(f"grad_check: eps {eps} outside [{EPS_RANGE[0]}, {EPS_RANGE[1]}]")
    workspace = params[0].workspace
    if workspace.precision != "f64":
        raise PrecisionError("grad_check runs in 64-bit precision only")

    for p in params:
        p.zero_grad()
    loss = f()
    _check_finite(loss)
    backward(loss)
    workspace.clear()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    for n, (p, a) in enumerate(zip(params, analytic)):
        indices = None
        if entries is not None and p.size > entries:
            indices = np.sort(rng_for(seed, "grad-check", n).choice(p.size, size=entries, replace=False))
        numeric = numeric_grad(f, p, eps, indices)
        a, numeric = a.reshape(-1), numeric.reshape(-1)
        if indices is not None:
            a, numeric = a[indices], numeric[indices]
        error = np.max(np.abs(a - numeric) / np.maximum(1.0, np.abs(numeric)))
        logger.debug(f"grad_check {p.name or p.shape}: max rel err {error:.3e}")
        worst = max(worst, float(error))
    return worst

def _evaluate(f) -> float:
    try:
        value = f()
    except DomainError as e:
        raise EvaluationError(f"grad_check: evaluating f failed: {e}") from e
    _check_finite(value)
    return float(value.data.reshape(-1)[0])

def _check_finite(value : Tensor) -> None:
    if value.data.size != 1:
        raise ContractError(f"grad_check: f must return a scalar, got shape {value.shape}")
    if not np.all(np.isfinite(value.data)):
        raise EvaluationError("grad_check: f returned a non-finite value")
