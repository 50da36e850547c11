"""
Query-conditioned token gating.

attend() runs multi-head attention from query embeddings onto the token matrix Z;
relevance() maps its output M through W^R to one scalar per token and normalises
jointly over all L tokens; fuse() takes the α-weighted sum of Z's rows.
"""
from dataclasses import dataclass, field
import logging

import numpy as np

from ..misc.exceptions import ConfigError, ContractError, DimensionError, InputError
from ..numcore import Tensor, ops
from ..streams import MODALITIES, StreamSettings, TokenSequence, assemble
from ..streams.assemble import Assembled
from .params import QuartParams

logger = logging.getLogger(__name__)

SIMPLEX_TOLERANCE = 1e-6
MODES = ("gated", "raw")

@dataclass
class AttentionOutput:
    """M (L_q × E) and a detached copy of every head's attention matrix A_h (L_q × L)."""
    M: Tensor
    weights: list[np.ndarray]

@dataclass
class RelevanceScores:
    """α over the L tokens (a 1 × L tensor) and the modality block boundaries."""
    alpha: Tensor
    boundaries: list[tuple[int, int]]
    normalized: bool = True

    @property
    def values(self) -> np.ndarray:
        return self.alpha.data.reshape(-1).astype(np.float64)

    def check(self) -> None:
        """Non-negative and summing to 1 (or at most 1 when masked blocks were zeroed without renormalising)."""
        values = self.values
        total = values.sum()
        if np.any(values < 0):
            raise ContractError("relevance scores have negative entries")
        if self.normalized and abs(total - 1.0) > SIMPLEX_TOLERANCE:
            raise ContractError(f"relevance scores sum to {total:.9f}, not 1")
        if not self.normalized and total > 1.0 + SIMPLEX_TOLERANCE:
            raise ContractError(f"relevance scores sum to {total:.9f} > 1")

@dataclass
class FusedContext:
    """c = Σ_j α_j Z_j (1 × E), with the α it came from."""
    c: Tensor
    alpha: RelevanceScores

@dataclass
class QuartOutput:
    """What the decoder is conditioned on, plus diagnostics."""
    context: Tensor
    alpha: RelevanceScores | None
    assembled: Assembled
    attention: AttentionOutput | None = None
    mode: str = "gated"
    dropped: tuple = field(default_factory=tuple)

def _as_matrix(z) -> Tensor:
    return z.tokens if isinstance(z, TokenSequence) else z

def attend(zq, Z : Tensor, params : QuartParams, key_mask : np.ndarray | None = None) -> AttentionOutput:
    """
    Per head h: A_h = softmax(zq W^Q_h (Z W^K_h)ᵀ / √d_k) over the L keys, head_h = A_h · Z W^V_h.
    M = [head_1 … head_H] · W^O.
    """
    zq = _as_matrix(zq)
    config = params.config
    if zq.shape[0] == 0:
        raise InputError("attend: empty query")
    if zq.shape[1] != config.embed_dim or Z.shape[1] != config.embed_dim:
        raise DimensionError(f"attend: query {zq.shape} and tokens {Z.shape} must be {config.embed_dim} wide")

    n_queries, n_keys = zq.shape[0], Z.shape[0]
    mask = None if key_mask is None else np.broadcast_to(np.asarray(key_mask, dtype=bool), (n_queries, n_keys))
    inv_sqrt = 1.0 / np.sqrt(config.head_dim)

    heads, weights = [], []
    for h in range(config.heads):
        q = ops.matmul(zq, params.w_q[h])
        k = ops.matmul(Z, params.w_k[h])
        v = ops.matmul(Z, params.w_v[h])
        a = ops.softmax(ops.scale(ops.matmul(q, ops.transpose(k)), inv_sqrt), axis=1, mask=mask)
        weights.append(a.data.copy())
        heads.append(ops.matmul(a, v))
    M = ops.matmul(ops.concat(heads, axis=1), params.w_o)
    return AttentionOutput(M=M, weights=weights)

def relevance(M : Tensor, w_r : Tensor, boundaries : list[tuple[int, int]], pooling : str = "mean",
              token_mask : np.ndarray | None = None) -> RelevanceScores:
    """S = M·W^R (L_q × L), pooled over query rows, then α = softmax over all L tokens jointly."""
    if M.shape[1] != w_r.shape[0]:
        raise DimensionError(f"relevance: M {M.shape} and W^R {w_r.shape} do not chain")
    scores = ops.matmul(M, w_r)
    if pooling == "mean":
        pooled = ops.mean(scores, axis=0, keepdims=True)
    elif pooling == "last":
        pooled = ops.slice(scores, 0, scores.shape[0] - 1, scores.shape[0])
    elif pooling == "max":
        pooled = ops.max(scores, axis=0, keepdims=True)
    else:
        raise ConfigError("pooling", f"unknown pooling {pooling!r}")
    mask = None if token_mask is None else np.asarray(token_mask, dtype=bool).reshape(1, -1)
    return RelevanceScores(alpha=ops.softmax(pooled, axis=1, mask=mask), boundaries=list(boundaries))

def fuse(alpha : RelevanceScores, Z : Tensor) -> FusedContext:
    """c = αᵀZ: a convex combination of Z's rows."""
    if alpha.alpha.shape[1] != Z.shape[0]:
        raise DimensionError(f"fuse: α has {alpha.alpha.shape[1]} entries for {Z.shape[0]} tokens")
    alpha.check()
    return FusedContext(c=ops.matmul(alpha.alpha, Z), alpha=alpha)

def forward(zq, zv : TokenSequence, za : TokenSequence, zs : TokenSequence, params : QuartParams, settings : StreamSettings,
            mode : str = "gated", dropped : tuple = (), renormalize : bool = True) -> QuartOutput:
    """
    gated: condition on the fused context row c (1 × E), returning α.
    raw: condition on all L rows of Z unweighted; no α.

    dropped names modalities whose tokens the caller zeroed; their relevance mass is
    zero, and the rest is renormalised to 1 unless renormalize is False.
    """
    if mode not in MODES:
        raise ConfigError("mode", f"must be gated or raw, got {mode!r}")
    if params.config.total_tokens != settings.total_tokens:
        raise ConfigError("total_tokens", f"W^R was built for L = {params.config.total_tokens}, streams give L = {settings.total_tokens}")

    assembled = assemble(zv, za, zs, settings)
    if mode == "raw":
        return QuartOutput(context=assembled.Z, alpha=None, assembled=assembled, mode=mode, dropped=tuple(dropped))

    keep = assembled.mask.copy()
    dropped_rows = np.zeros_like(keep)
    for modality in dropped:
        start, stop = assembled.boundaries[MODALITIES.index(modality)]
        dropped_rows[start:stop] = True

    attention = attend(zq, assembled.Z, params, key_mask=keep)
    if renormalize:
        alpha = relevance(attention.M, params.w_r, assembled.boundaries, params.config.pooling, token_mask=keep & ~dropped_rows)
    else:
        alpha = relevance(attention.M, params.w_r, assembled.boundaries, params.config.pooling, token_mask=keep)
        if dropped_rows.any():
            zeroing = assembled.Z.workspace.tensor((~dropped_rows).astype(np.float64).reshape(1, -1))
            alpha = RelevanceScores(alpha=ops.mul(alpha.alpha, zeroing), boundaries=alpha.boundaries, normalized=False)
    fused = fuse(alpha, assembled.Z)
    return QuartOutput(context=fused.c, alpha=alpha, assembled=assembled, attention=attention, mode=mode, dropped=tuple(dropped))

def modality_mass(alpha : RelevanceScores, boundaries : list[tuple[int, int]] | None = None) -> tuple[float, float, float]:
    """Block sums of α for video, audio and sensor."""
    boundaries = alpha.boundaries if boundaries is None else boundaries
    values = alpha.values
    if len(boundaries) != len(MODALITIES) or boundaries[0][0] != 0 or boundaries[-1][1] != values.size or any(
            boundaries[i][1] != boundaries[i + 1][0] or boundaries[i][0] >= boundaries[i][1] for i in range(len(boundaries) - 1)):
        raise ContractError(f"boundaries {boundaries} do not partition 0..{values.size}")
    masses = tuple(float(values[start:stop].sum()) for start, stop in boundaries)
    if alpha.normalized and abs(sum(masses) - 1.0) > SIMPLEX_TOLERANCE:
        raise ContractError(f"modality masses sum to {sum(masses):.9f}, not 1")
    return masses

def alpha_entropy(alpha : RelevanceScores) -> float:
    """−Σ α log α with 0·log 0 = 0."""
    values = alpha.values
    positive = values[values > 0]
    return float(-(positive * np.log(positive)).sum())
