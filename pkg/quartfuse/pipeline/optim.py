"""AdamW with decoupled weight decay and one learning rate per parameter group."""
from dataclasses import dataclass, field
import logging

import numpy as np

from ..misc.exceptions import OptimizerError
from ..numcore import Tensor

logger = logging.getLogger(__name__)

@dataclass
class Moments:
    """Step count and first/second moment estimates, keyed by parameter name. Stored in 64 bits."""
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

def adamw_update(param : np.ndarray, grad : np.ndarray, m : np.ndarray, v : np.ndarray, t : int, lr : float,
                 beta1 : float, beta2 : float, eps : float, weight_decay : float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    One AdamW step for a single array, t counting from 1:
        θ ← θ − lr·wd·θ
        m ← β1·m + (1 − β1)·g,  v ← β2·v + (1 − β2)·g²
        θ ← θ − lr·m̂ / (√v̂ + eps)  with m̂ = m / (1 − β1^t), v̂ = v / (1 − β2^t)
    """
    theta = param.astype(np.float64)
    g = grad.astype(np.float64)
    theta = theta * (1.0 - lr * weight_decay)
    m = beta1 * m + (1.0 - beta1) * g
    v = beta2 * v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    theta = theta - lr * m_hat / (np.sqrt(v_hat) + eps)
    return theta.astype(param.dtype), m, v

def adamw_step(params : dict[str, Tensor], grads : dict[str, np.ndarray], moments : Moments, lr : float, beta1 : float = 0.9,
               beta2 : float = 0.999, eps : float = 1e-8, weight_decay : float = 0.03, group : str | None = None) -> None:
    """Update params in place and advance moments by one step. Missing gradients count as zero."""
    if lr <= 0:
        raise OptimizerError(f"learning rate must be positive, got {lr}", group)
    for name, grad in grads.items():
        if grad is not None and not np.all(np.isfinite(grad)):
            logger.error(f"Non-finite gradient in {group or 'parameters'}: {name}")
            raise OptimizerError(f"non-finite gradient for {name} in group {group}", group)
    moments.step += 1
    for name, tensor in params.items():
        grad = grads.get(name)
        if grad is None:
            grad = np.zeros_like(tensor.data)
        m = moments.m.get(name, np.zeros(tensor.data.shape))
        v = moments.v.get(name, np.zeros(tensor.data.shape))
        tensor.data[...], moments.m[name], moments.v[name] = adamw_update(
            tensor.data, grad, m, v, moments.step, lr, beta1, beta2, eps, weight_decay)

class AdamW():
    """AdamW over named parameter groups, each with its own learning rate and moments."""

    def __init__(self, groups : dict[str, dict[str, Tensor]], lrs : dict[str, float], beta1 : float = 0.9, beta2 : float = 0.999,
                 eps : float = 1e-8, weight_decay : float = 0.03, grad_clip : float = 0.0):
        missing = set(groups) - set(lrs)
        if missing:
            raise OptimizerError(f"no learning rate for groups {sorted(missing)}")
        if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
            raise OptimizerError(f"betas must lie in [0, 1), got ({beta1}, {beta2})")
        if eps <= 0 or weight_decay < 0 or grad_clip < 0:
            raise OptimizerError("eps must be positive; weight_decay and grad_clip non-negative")
        self.groups = groups
        self.lrs = dict(lrs)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.grad_clip = grad_clip
        self.moments = {group: Moments() for group in groups}

    def zero_grad(self) -> None:
        for params in self.groups.values():
            for tensor in params.values():
                tensor.zero_grad()

    def grad_norm(self) -> float:
        total = 0.0
        for params in self.groups.values():
            for tensor in params.values():
                if tensor.grad is not None:
                    total += float(np.sum(tensor.grad.astype(np.float64) ** 2))
        return float(np.sqrt(total))

    def step(self) -> float:
        """Apply one update to every group; returns the pre-clip global gradient norm."""
        norm = self.grad_norm()
        factor = self.grad_clip / norm if self.grad_clip > 0 and norm > self.grad_clip else 1.0
        for group, params in self.groups.items():
            grads = {name: (None if t.grad is None else t.grad * factor) for name, t in params.items()}
            adamw_step(params, grads, self.moments[group], self.lrs[group], self.beta1, self.beta2, self.eps, self.weight_decay, group)
        return norm

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Moment arrays keyed "<group>.<name>.m" / ".v" for checkpoints."""
        arrays = {}
        for group, moments in self.moments.items():
            for name in sorted(moments.m):
                arrays[f"{group}.{name}.m"] = moments.m[name]
                arrays[f"{group}.{name}.v"] = moments.v[name]
        return arrays

    def steps(self) -> dict[str, int]:
        return {group: moments.step for group, moments in self.moments.items()}

    def load_state(self, steps : dict[str, int], arrays : dict[str, np.ndarray]) -> None:
        for group, moments in self.moments.items():
            moments.step = int(steps.get(group, 0))
            for name in self.groups[group]:
                if f"{group}.{name}.m" in arrays:
                    moments.m[name] = arrays[f"{group}.{name}.m"].astype(np.float64)
                    moments.v[name] = arrays[f"{group}.{name}.v"].astype(np.float64)
