"""
Frozen per-modality encoders and trainable two-layer MLP projections into the shared E-wide space.

The encoder slices a stream into frames_per_token windows, flattens each window and
applies a fixed random linear + relu map. The projection is relu(x·W1 + b1)·W2 + b2.
"""
from dataclasses import dataclass
import logging

import numpy as np

from ..misc.exceptions import DimensionError, InputError
from ..misc.seeds import rng_for
from ..numcore import Tensor, Workspace, ops
from .types import MODALITIES, ModalityLayout, RawStream, StreamSettings, TokenSequence

logger = logging.getLogger(__name__)

@dataclass
class EncoderParams:
    """A frozen window encoder for one modality."""
    modality: str
    frames_per_token: int
    n_tokens: int
    weight: Tensor
    bias: Tensor

    def parameters(self) -> dict[str, Tensor]:
        return {"weight": self.weight, "bias": self.bias}

@dataclass
class ProjectionParams:
    """Two-layer MLP projecting encoded tokens (D'_m wide) to the shared width E."""
    modality: str
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    @property
    def trainable(self) -> bool:
        return self.w1.requires_grad

    @trainable.setter
    def trainable(self, flag : bool) -> None:
        for p in self.parameters().values():
            p.requires_grad = flag

    def parameters(self) -> dict[str, Tensor]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

def init_encoder(workspace : Workspace, modality : str, layout : ModalityLayout, seed : int) -> EncoderParams:
    rng = rng_for(seed, "init", "encoder", modality)
    fan_in = layout.frames_per_token * layout.dim
    weight = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, layout.encoded_dim))
    return EncoderParams(
        modality=modality,
        frames_per_token=layout.frames_per_token,
        n_tokens=layout.tokens,
        weight=workspace.tensor(weight, name=f"encoders.{modality}.weight"),
        bias=workspace.zeros((layout.encoded_dim,), name=f"encoders.{modality}.bias"),
    )

def init_projection(workspace : Workspace, modality : str, layout : ModalityLayout, hidden : int, embed_dim : int, seed : int) -> ProjectionParams:
    rng = rng_for(seed, "init", "projection", modality)
    prefix = f"projections.{modality}"
    return ProjectionParams(
        modality=modality,
        w1=workspace.tensor(rng.normal(0.0, 1.0 / np.sqrt(layout.encoded_dim), size=(layout.encoded_dim, hidden)), requires_grad=True, name=f"{prefix}.w1"),
        b1=workspace.zeros((hidden,), requires_grad=True, name=f"{prefix}.b1"),
        w2=workspace.tensor(rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(hidden, embed_dim)), requires_grad=True, name=f"{prefix}.w2"),
        b2=workspace.zeros((embed_dim,), requires_grad=True, name=f"{prefix}.b2"),
    )

def init_stream_params(workspace : Workspace, settings : StreamSettings, seed : int) -> tuple[dict, dict]:
    """Encoders and projections for every modality."""
    encoders = {m: init_encoder(workspace, m, settings.layout(m), seed) for m in MODALITIES}
    projections = {m: init_projection(workspace, m, settings.layout(m), settings.projection_hidden, settings.embed_dim, seed)
                   for m in MODALITIES}
    return encoders, projections

def window_starts(length : int, frames_per_token : int, n_tokens : int) -> np.ndarray:
    """
    First frame of every window the encoder reads.

    With at least n_tokens windows available, n_tokens starts are sampled uniformly over
    the stream; otherwise every available window is used and the rest is padding.
    """
    if length < frames_per_token:
        raise InputError(f"stream of {length} frames is shorter than one {frames_per_token}-frame window")
    available = length // frames_per_token
    if available >= n_tokens:
        return np.round(np.linspace(0, length - frames_per_token, n_tokens)).astype(np.int64)
    return np.arange(available, dtype=np.int64) * frames_per_token

def encode(stream : RawStream, params : EncoderParams) -> tuple[Tensor, int]:
    """
    Encode a stream into (L_m × D'_m) tokens.

    Returns the tokens and the number of real (unpadded) rows; padding rows are zero.
    """
    if stream.modality != params.modality:
        raise InputError(f"{stream.modality} stream given to the {params.modality} encoder")
    width = params.weight.shape[0]
    if stream.dim * params.frames_per_token != width:
        raise DimensionError(f"{stream.modality}: windows of {params.frames_per_token}×{stream.dim} do not fit encoder input {width}")

    workspace = params.weight.workspace
    starts = window_starts(stream.length, params.frames_per_token, params.n_tokens)
    windows = np.stack([stream.frames[s:s + params.frames_per_token].reshape(-1) for s in starts])
    encoded = ops.relu(ops.add_bias(ops.matmul(workspace.tensor(windows), params.weight), params.bias))

    valid = len(starts)
    if valid < params.n_tokens:
        padding = workspace.zeros((params.n_tokens - valid, params.weight.shape[1]))
        encoded = ops.concat([encoded, padding], axis=0)
    return encoded, valid

def project(encoded : Tensor, params : ProjectionParams, offset : int = 0, valid : int | None = None) -> TokenSequence:
    """relu(encoded·W1 + b1)·W2 + b2 as a TokenSequence whose positions start at offset."""
    if encoded.shape[1] != params.w1.shape[0]:
        raise DimensionError(f"project: encoded width {encoded.shape} does not match W1 {params.w1.shape}")
    hidden = ops.relu(ops.add_bias(ops.matmul(encoded, params.w1), params.b1))
    tokens = ops.add_bias(ops.matmul(hidden, params.w2), params.b2)
    length = tokens.shape[0]
    return TokenSequence(
        modality=params.modality,
        tokens=tokens,
        global_positions=list(range(offset, offset + length)),
        valid=length if valid is None else valid,
    )
