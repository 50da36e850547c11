"""Learnable matrices of the gating module, stored per head."""
from dataclasses import dataclass
import logging

import numpy as np

from ..misc.exceptions import ConfigError
from ..misc.seeds import rng_for
from ..numcore import Tensor, Workspace

logger = logging.getLogger(__name__)

POOLINGS = ("mean", "last", "max")
INIT_STD = 0.02

@dataclass(frozen=True)
class QuartConfig:
    """H heads of width d_k over E-wide tokens; W^R fixes the total token count L."""
    heads: int
    head_dim: int
    embed_dim: int
    total_tokens: int
    pooling: str = "mean"

    def __post_init__(self):
        if self.heads * self.head_dim != self.embed_dim:
            raise ConfigError("quart_head_dim", f"heads * head_dim must equal embed_dim ({self.heads} * {self.head_dim} != {self.embed_dim})")
        if self.pooling not in POOLINGS:
            raise ConfigError("pooling", f"must be one of {', '.join(POOLINGS)}")
        if self.total_tokens < 1:
            raise ConfigError("total_tokens", "must be positive")

@dataclass
class QuartParams:
    """W^Q_h, W^K_h, W^V_h (E × d_k) per head, W^O (H·d_k × E) and the relevance head W^R (E × L)."""
    w_q: list[Tensor]
    w_k: list[Tensor]
    w_v: list[Tensor]
    w_o: Tensor
    w_r: Tensor
    config: QuartConfig

    def __post_init__(self):
        c = self.config
        for name in ("w_q", "w_k", "w_v"):
            mats = getattr(self, name)
            if len(mats) != c.heads or any(m.shape != [c.embed_dim, c.head_dim] for m in mats):
                raise ConfigError(name, f"expected {c.heads} matrices of shape {[c.embed_dim, c.head_dim]}")
        if self.w_o.shape != [c.heads * c.head_dim, c.embed_dim]:
            raise ConfigError("w_o", f"expected shape {[c.heads * c.head_dim, c.embed_dim]}, got {self.w_o.shape}")
        if self.w_r.shape != [c.embed_dim, c.total_tokens]:
            raise ConfigError("w_r", f"W^R must be {[c.embed_dim, c.total_tokens]}, got {self.w_r.shape}")

    @property
    def workspace(self) -> Workspace:
        return self.w_o.workspace

    def parameters(self) -> dict[str, Tensor]:
        named = {}
        for h in range(self.config.heads):
            named[f"head{h}.w_q"] = self.w_q[h]
            named[f"head{h}.w_k"] = self.w_k[h]
            named[f"head{h}.w_v"] = self.w_v[h]
        named["w_o"] = self.w_o
        named["w_r"] = self.w_r
        return named

    def set_trainable(self, flag : bool) -> None:
        for p in self.parameters().values():
            p.requires_grad = flag

def init_quart(workspace : Workspace, config : QuartConfig, seed : int) -> QuartParams:
    """Fresh gating parameters; every matrix ~ N(0, 0.02²)."""
    rng = rng_for(seed, "init", "quart")

    def matrix(shape, name):
        return workspace.tensor(rng.normal(0.0, INIT_STD, size=shape), requires_grad=True, name=f"quart.{name}")

    e, d = config.embed_dim, config.head_dim
    return QuartParams(
        w_q=[matrix((e, d), f"head{h}.w_q") for h in range(config.heads)],
        w_k=[matrix((e, d), f"head{h}.w_k") for h in range(config.heads)],
        w_v=[matrix((e, d), f"head{h}.w_v") for h in range(config.heads)],
        w_o=matrix((config.heads * d, e), "w_o"),
        w_r=matrix((e, config.total_tokens), "w_r"),
        config=config,
    )

def zero_relevance_head(params : QuartParams) -> None:
    """Set W^R to zero in place, which makes α uniform over unmasked tokens."""
    params.w_r.data[...] = np.zeros_like(params.w_r.data)
