"""Concatenate the three modality blocks into Z and add global sinusoidal positions."""
from dataclasses import dataclass

import numpy as np

from ..misc.exceptions import ConfigError, DimensionError
from ..numcore import Tensor, ops
from .types import MODALITIES, StreamSettings, TokenSequence

@dataclass
class Assembled:
    """The unified token matrix Z (L × E) with its row bookkeeping."""
    Z: Tensor
    positions: list[int]
    boundaries: list[tuple[int, int]]
    mask: np.ndarray

    @property
    def length(self) -> int:
        return self.Z.shape[0]

def sinusoidal_positions(positions, embed_dim : int) -> np.ndarray:
    """PE(pos, 2i) = sin(pos / 10000^(2i/E)), PE(pos, 2i+1) = cos(pos / 10000^(2i/E))."""
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 1)
    even = np.arange(0, embed_dim, 2, dtype=np.float64)
    angles = positions / np.power(10000.0, even / embed_dim)
    pe = np.zeros((positions.shape[0], embed_dim))
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles[:, :embed_dim // 2])
    return pe

def assemble(zv : TokenSequence, za : TokenSequence, zs : TokenSequence, settings : StreamSettings) -> Assembled:
    """Rows are the video block, then audio, then sensor; positions run 0..L-1 over the whole sequence."""
    blocks = (zv, za, zs)
    for modality, block in zip(MODALITIES, blocks):
        if block.modality != modality:
            raise ConfigError("assemble", f"expected the {modality} block, got {block.modality}")
        expected = settings.layout(modality).tokens
        if block.length != expected:
            raise ConfigError(f"{modality}_tokens", f"block has {block.length} tokens, config says {expected}")
        if block.tokens.shape[1] != settings.embed_dim:
            raise DimensionError(f"{modality} tokens are {block.tokens.shape[1]} wide, embed_dim is {settings.embed_dim}")

    length = settings.total_tokens
    positions = list(range(length))
    workspace = zv.tokens.workspace
    pe = workspace.tensor(sinusoidal_positions(positions, settings.embed_dim))
    Z = ops.add(ops.concat([b.tokens for b in blocks], axis=0), pe)
    return Assembled(
        Z=Z,
        positions=positions,
        boundaries=settings.boundaries,
        mask=np.concatenate([b.mask for b in blocks]),
    )
