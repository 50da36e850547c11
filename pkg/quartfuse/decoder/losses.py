"""The autoregressive loss, the entropy regulariser over α and their weighted sum."""
import logging

import numpy as np

from ..misc.exceptions import ConfigError, ContractError, InputError
from ..numcore import Tensor, ops
from ..quart import RelevanceScores

logger = logging.getLogger(__name__)

REG_SIGNS = {"as_written": 1.0, "sparsity": -1.0}

def loss_quart(logits : Tensor, targets) -> Tensor:
    """−(1/T) Σ_t log softmax(logits_t)[y_t]."""
    targets = np.asarray(list(targets), dtype=np.int64)
    n_positions, vocab_size = logits.shape
    if targets.size == 0:
        raise InputError("loss_quart needs at least one target")
    if targets.size != n_positions:
        raise InputError(f"{targets.size} targets for {n_positions} logit rows")
    if np.any(targets < 0) or np.any(targets >= vocab_size):
        raise InputError(f"target ids {targets.tolist()} outside vocabulary of {vocab_size}")
    one_hot = np.zeros((n_positions, vocab_size))
    one_hot[np.arange(n_positions), targets] = 1.0
    picked = ops.mul(ops.log_softmax(logits, axis=1), logits.workspace.tensor(one_hot))
    return ops.scale(ops.sum(picked), -1.0 / n_positions)

def loss_reg(alpha) -> Tensor:
    """Σ_j α_j log α_j with 0·log 0 = 0; between −log L and 0."""
    if isinstance(alpha, RelevanceScores):
        alpha.check()
        alpha = alpha.alpha
    else:
        RelevanceScores(alpha=alpha, boundaries=[]).check()
    return ops.sum(ops.xlogx(alpha))

def loss_total(quart : Tensor, reg : Tensor | None, lam : float, reg_sign : str = "as_written") -> Tensor:
    """L_QuART + sign·λ·L_reg; with λ = 0 the QuART loss itself is returned."""
    if lam < 0:
        raise ConfigError("lambda_reg", f"must be non-negative, got {lam}")
    if reg_sign not in REG_SIGNS:
        raise ConfigError("reg_sign", f"must be as_written or sparsity, got {reg_sign!r}")
    if lam == 0:
        return quart
    if reg is None:
        raise ContractError("a positive λ needs relevance scores; raw conditioning has none")
    return ops.add(quart, ops.scale(reg, REG_SIGNS[reg_sign] * lam))
