"""Low-rank adapters on the decoder's attention projections."""
from dataclasses import dataclass
import logging

import numpy as np

from ..misc.exceptions import ConfigError, DimensionError
from ..misc.seeds import rng_for
from ..numcore import Tensor, Workspace, ops
from .model import ATTENTION_MATRICES, DecoderLayer, DecoderParams

logger = logging.getLogger(__name__)

@dataclass
class LoraAdapter:
    """x ↦ s·(x·A)·B for a frozen base matrix of shape (in × out); A is (in × r), B is (r × out)."""
    target: str
    A: Tensor
    B: Tensor
    scaling: float

    def __post_init__(self):
        if self.A.shape[1] != self.B.shape[0]:
            raise DimensionError(f"LoRA {self.target}: A {self.A.shape} and B {self.B.shape} disagree on rank")

    @property
    def rank(self) -> int:
        return self.A.shape[1]

    def __call__(self, x : Tensor) -> Tensor:
        return ops.scale(ops.matmul(ops.matmul(x, self.A), self.B), self.scaling)

    def delta(self) -> np.ndarray:
        return self.scaling * (self.A.data @ self.B.data)

class LoraAdapters():
    """The adapter set of one decoder: one LoraAdapter per targeted matrix, keyed "layer{i}.w_q" and so on."""

    def __init__(self, adapters : list[LoraAdapter]):
        self.adapters = list(adapters)

    def by_target(self) -> dict[str, LoraAdapter]:
        return {a.target: a for a in self.adapters}

    @property
    def rank(self) -> int:
        return self.adapters[0].rank if self.adapters else 0

    def parameters(self) -> dict[str, Tensor]:
        named = {}
        for adapter in self.adapters:
            named[f"{adapter.target}.A"] = adapter.A
            named[f"{adapter.target}.B"] = adapter.B
        return named

    def set_trainable(self, flag : bool) -> None:
        for p in self.parameters().values():
            p.requires_grad = flag

def init_lora(workspace : Workspace, decoder : DecoderParams, rank : int, seed : int,
              targets : tuple = ATTENTION_MATRICES) -> LoraAdapters:
    """A ~ N(0, 1/in), B = 0, s = 1/r, on every layer's attention matrices."""
    if rank < 1:
        raise ConfigError("lora_rank", "must be at least 1")
    rng = rng_for(seed, "init", "lora")
    adapters = []
    for i, layer in enumerate(decoder.layers):
        for name in targets:
            base = getattr(layer, name)
            fan_in, fan_out = base.shape
            target = f"layer{i}.{name}"
            adapters.append(LoraAdapter(
                target=target,
                A=workspace.tensor(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, rank)), requires_grad=True, name=f"lora.{target}.A"),
                B=workspace.zeros((rank, fan_out), requires_grad=True, name=f"lora.{target}.B"),
                scaling=1.0 / rank,
            ))
    logger.debug(f"LoRA rank {rank} on {len(adapters)} matrices")
    return LoraAdapters(adapters)

def lora_merge(base : Tensor, adapter : LoraAdapter) -> np.ndarray:
    """base + s·A·B as a plain array."""
    if base.shape != [adapter.A.shape[0], adapter.B.shape[1]]:
        raise DimensionError(f"LoRA {adapter.target}: base {base.shape} does not match A·B")
    return base.data + adapter.delta().astype(base.data.dtype)

def merge_adapters(decoder : DecoderParams, adapters : LoraAdapters) -> DecoderParams:
    """A copy of the decoder with every adapter folded into its base matrix."""
    by_target = adapters.by_target()
    workspace = decoder.workspace
    layers = []
    for i, layer in enumerate(decoder.layers):
        fields = {}
        for name, tensor in layer.parameters().items():
            adapter = by_target.get(f"layer{i}.{name}")
            data = lora_merge(tensor, adapter) if adapter is not None else tensor.data
            fields[name] = workspace.tensor(data, name=tensor.name)
        layers.append(DecoderLayer(**fields))
    return DecoderParams(
        embedding=decoder.embedding.detach(),
        layers=layers,
        lnf_gain=decoder.lnf_gain.detach(),
        lnf_bias=decoder.lnf_bias.detach(),
        head=decoder.head.detach(),
        config=decoder.config,
    )
