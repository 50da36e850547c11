"""
A small pre-LN decoder-only transformer over integer token ids.

The input sequence is [context row(s)] ⊕ [query embeddings] ⊕ [answer prefix embeddings]
with causal self-attention over all of it. Logits are reported at the answer-prefix
positions only: row t predicts answer token t.
"""
from dataclasses import dataclass
import logging

import numpy as np

from ..misc.exceptions import ConfigError, DimensionError, InputError
from ..misc.seeds import rng_for
from ..numcore import Tensor, Workspace, ops
from ..streams.assemble import sinusoidal_positions

logger = logging.getLogger(__name__)

ATTENTION_MATRICES = ("w_q", "w_k", "w_v", "w_o")

@dataclass(frozen=True)
class DecoderConfig:
    layers: int = 2
    heads: int = 2
    embed_dim: int = 32
    vocab_size: int = 64
    mlp_hidden: int = 64

    def __post_init__(self):
        if self.embed_dim % self.heads:
            raise ConfigError("decoder_heads", f"embed_dim {self.embed_dim} is not divisible by {self.heads} heads")
        if self.layers < 1 or self.mlp_hidden < 1 or self.vocab_size < 3:
            raise ConfigError("decoder", "layers, mlp_hidden must be positive and the vocabulary must hold pad/bos/eos")

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.heads

    @classmethod
    def from_config(cls, config) -> "DecoderConfig":
        return cls(layers=config.decoder_layers, heads=config.decoder_heads, embed_dim=config.embed_dim,
                   vocab_size=config.vocab_size, mlp_hidden=config.decoder_mlp_hidden)

@dataclass
class DecoderLayer:
    ln1_gain: Tensor
    ln1_bias: Tensor
    w_q: Tensor
    w_k: Tensor
    w_v: Tensor
    w_o: Tensor
    ln2_gain: Tensor
    ln2_bias: Tensor
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    def parameters(self) -> dict[str, Tensor]:
        return dict(vars(self))

@dataclass
class DecoderParams:
    """Token embedding (V × E), the layer stack, a final norm and the output head (E × V)."""
    embedding: Tensor
    layers: list[DecoderLayer]
    lnf_gain: Tensor
    lnf_bias: Tensor
    head: Tensor
    config: DecoderConfig

    def __post_init__(self):
        c = self.config
        if self.embedding.shape != [c.vocab_size, c.embed_dim]:
            raise DimensionError(f"embedding {self.embedding.shape} does not match V={c.vocab_size}, E={c.embed_dim}")
        if self.head.shape != [c.embed_dim, c.vocab_size]:
            raise DimensionError(f"output head {self.head.shape} must be {[c.embed_dim, c.vocab_size]}")
        if len(self.layers) != c.layers:
            raise ConfigError("decoder_layers", f"{len(self.layers)} layers given, config says {c.layers}")

    @property
    def workspace(self) -> Workspace:
        return self.head.workspace

    def parameters(self) -> dict[str, Tensor]:
        named = {"embedding": self.embedding}
        for i, layer in enumerate(self.layers):
            for name, tensor in layer.parameters().items():
                named[f"layer{i}.{name}"] = tensor
        named["lnf_gain"] = self.lnf_gain
        named["lnf_bias"] = self.lnf_bias
        named["head"] = self.head
        return named

    def set_trainable(self, flag : bool) -> None:
        for p in self.parameters().values():
            p.requires_grad = flag

    def embed(self, tokens) -> Tensor:
        tokens = list(tokens)
        if any(t >= self.config.vocab_size or t < 0 for t in tokens):
            raise InputError(f"token ids {tokens} outside vocabulary of {self.config.vocab_size}")
        return ops.embedding_lookup(self.embedding, tokens)

def init_decoder(workspace : Workspace, config : DecoderConfig, seed : int) -> DecoderParams:
    """Linear maps ~ N(0, 1/fan_in); embeddings ~ N(0, 1); norms start at identity."""
    rng = rng_for(seed, "init", "decoder")
    e, hidden = config.embed_dim, config.mlp_hidden

    def linear(fan_in, fan_out, name):
        return workspace.tensor(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out)), name=f"decoder.{name}")

    def constant(value, size, name):
        return workspace.tensor(np.full(size, value), name=f"decoder.{name}")

    layers = []
    for i in range(config.layers):
        layers.append(DecoderLayer(
            ln1_gain=constant(1.0, e, f"layer{i}.ln1_gain"),
            ln1_bias=constant(0.0, e, f"layer{i}.ln1_bias"),
            w_q=linear(e, e, f"layer{i}.w_q"),
            w_k=linear(e, e, f"layer{i}.w_k"),
            w_v=linear(e, e, f"layer{i}.w_v"),
            w_o=linear(e, e, f"layer{i}.w_o"),
            ln2_gain=constant(1.0, e, f"layer{i}.ln2_gain"),
            ln2_bias=constant(0.0, e, f"layer{i}.ln2_bias"),
            w1=linear(e, hidden, f"layer{i}.w1"),
            b1=constant(0.0, hidden, f"layer{i}.b1"),
            w2=linear(hidden, e, f"layer{i}.w2"),
            b2=constant(0.0, e, f"layer{i}.b2"),
        ))
    return DecoderParams(
        embedding=workspace.tensor(rng.normal(0.0, 1.0, size=(config.vocab_size, e)), name="decoder.embedding"),
        layers=layers,
        lnf_gain=constant(1.0, e, "lnf_gain"),
        lnf_bias=constant(0.0, e, "lnf_bias"),
        head=linear(e, config.vocab_size, "head"),
        config=config,
    )

def causal_mask(n : int) -> np.ndarray:
    """True where position t may attend to position u, i.e. u ≤ t."""
    return np.tril(np.ones((n, n), dtype=bool))

def _project(x : Tensor, weight : Tensor, adapter) -> Tensor:
    out = ops.matmul(x, weight)
    if adapter is not None:
        out = ops.add(out, adapter(x))
    return out

def _self_attention(x : Tensor, layer : DecoderLayer, config : DecoderConfig, adapters : dict, prefix : str) -> Tensor:
    q, k, v = (_project(x, getattr(layer, name), adapters.get(f"{prefix}.{name}")) for name in ("w_q", "w_k", "w_v"))
    mask = causal_mask(x.shape[0])
    d = config.head_dim
    heads = []
    for h in range(config.heads):
        qh, kh, vh = (ops.slice(m, 1, h * d, (h + 1) * d) for m in (q, k, v))
        scores = ops.scale(ops.matmul(qh, ops.transpose(kh)), 1.0 / np.sqrt(d))
        heads.append(ops.matmul(ops.softmax(scores, axis=1, mask=mask), vh))
    return _project(ops.concat(heads, axis=1), layer.w_o, adapters.get(f"{prefix}.w_o"))

def _mlp(x : Tensor, layer : DecoderLayer) -> Tensor:
    hidden = ops.relu(ops.add_bias(ops.matmul(x, layer.w1), layer.b1))
    return ops.add_bias(ops.matmul(hidden, layer.w2), layer.b2)

def hidden_states(sequence : Tensor, params : DecoderParams, adapters=None) -> Tensor:
    """Run the layer stack and the final norm over an already-embedded sequence."""
    adapters = {} if adapters is None else adapters.by_target()
    x = ops.add(sequence, sequence.workspace.tensor(sinusoidal_positions(range(sequence.shape[0]), params.config.embed_dim)))
    for i, layer in enumerate(params.layers):
        x = ops.add(x, _self_attention(ops.layer_norm(x, layer.ln1_gain, layer.ln1_bias), layer, params.config, adapters, f"layer{i}"))
        x = ops.add(x, _mlp(ops.layer_norm(x, layer.ln2_gain, layer.ln2_bias), layer))
    return ops.layer_norm(x, params.lnf_gain, params.lnf_bias)

def decode_logits(context : Tensor, query_tokens, answer_prefix, params : DecoderParams, adapters=None) -> Tensor | None:
    """
    Logits (T × V) at the T answer-prefix positions, or None when the prefix is empty.

    context is one fused row (gated) or L rows (raw); adapters, when given, add
    s·(x·A)·B to the attention projections they target.
    """
    answer_prefix = list(answer_prefix)
    if not answer_prefix:
        return None
    if context.shape[1] != params.config.embed_dim:
        raise DimensionError(f"context rows are {context.shape[1]} wide, decoder expects {params.config.embed_dim}")
    parts = [context]
    if len(query_tokens):
        parts.append(params.embed(query_tokens))
    parts.append(params.embed(answer_prefix))
    hidden = hidden_states(ops.concat(parts, axis=0), params, adapters)
    n = hidden.shape[0]
    answer_rows = ops.slice(hidden, 0, n - len(answer_prefix), n)
    return ops.matmul(answer_rows, params.head)
