"""Data types shared by the stream generator, encoders and everything downstream."""
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..misc.exceptions import ConfigError, InputError
from ..numcore import Tensor

MODALITIES = ("video", "audio", "sensor")
MODALITY_LETTERS = {"video": "V", "audio": "A", "sensor": "S"}

@dataclass(frozen=True)
class RawStream:
    """One modality's native frames (T_m × D_m). The modality tag never changes."""
    modality: str
    frames: np.ndarray
    sample_rate: float

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise InputError(f"unknown modality {self.modality!r}")
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
            raise InputError(f"{self.modality} stream must be a non-empty T×D matrix, got shape {list(frames.shape)}")
        if not np.all(np.isfinite(frames)):
            raise InputError(f"{self.modality} stream has non-finite values")
        object.__setattr__(self, "frames", frames)

    @property
    def length(self) -> int:
        return int(self.frames.shape[0])

    @property
    def dim(self) -> int:
        return int(self.frames.shape[1])

    def with_frames(self, frames : np.ndarray) -> "RawStream":
        """Same modality and rate, new frames."""
        return replace(self, frames=frames)

@dataclass
class TokenSequence:
    """One modality's projected tokens (L_m × E) and their offsets in the concatenated sequence."""
    modality: str
    tokens: Tensor
    global_positions: list[int]
    valid: int

    def __post_init__(self):
        if len(self.global_positions) != self.tokens.shape[0]:
            raise InputError(f"{self.modality}: {len(self.global_positions)} positions for {self.tokens.shape[0]} tokens")
        if not 0 < self.valid <= self.tokens.shape[0]:
            raise InputError(f"{self.modality}: valid token count {self.valid} outside [1, {self.tokens.shape[0]}]")

    @property
    def length(self) -> int:
        return self.tokens.shape[0]

    @property
    def mask(self) -> np.ndarray:
        """True for real tokens, False for padding rows."""
        mask = np.zeros(self.length, dtype=bool)
        mask[:self.valid] = True
        return mask

@dataclass
class MultimodalSample:
    """Synchronised synthetic streams, the question, the answer and the ground-truth relevant modalities."""
    sample_id: int
    video: RawStream
    audio: RawStream
    sensor: RawStream
    query_tokens: list[int]
    answer_tokens: list[int]
    relevant_modality: frozenset
    scenario_id: str
    seed: int
    stream_labels: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.relevant_modality:
            raise InputError(f"sample {self.sample_id}: relevant_modality is empty")
        self.relevant_modality = frozenset(self.relevant_modality)

    def stream(self, modality : str) -> RawStream:
        return getattr(self, modality)

    def with_streams(self, **streams) -> "MultimodalSample":
        """A copy with some streams replaced. Labels, query and answer are carried over untouched."""
        return replace(self, **streams, stream_labels=dict(self.stream_labels))

@dataclass(frozen=True)
class ModalityLayout:
    """Per-modality sizes: token count L_m, native frames T_m × D_m, window and encoder width D'_m."""
    tokens: int
    frames: int
    frames_per_token: int
    dim: int
    encoded_dim: int
    sample_rate: float

@dataclass(frozen=True)
class StreamSettings:
    """Everything the generator, encoders and assemble need to agree on."""
    video: ModalityLayout
    audio: ModalityLayout
    sensor: ModalityLayout
    embed_dim: int
    projection_hidden: int
    noise_std: float
    signal_amplitude: float

    @classmethod
    def from_config(cls, config) -> "StreamSettings":
        layouts = {}
        for modality, rate in zip(MODALITIES, (8.0, 12.0, 16.0)):
            layouts[modality] = ModalityLayout(
                tokens=getattr(config, f"{modality}_tokens"),
                frames=getattr(config, f"{modality}_frames"),
                frames_per_token=getattr(config, f"{modality}_frames_per_token"),
                dim=getattr(config, f"{modality}_dim"),
                encoded_dim=getattr(config, f"{modality}_encoded_dim"),
                sample_rate=rate,
            )
            if layouts[modality].dim < 4:
                raise ConfigError(f"{modality}_dim", "must be at least 4 (one channel group per answer)")
        return cls(
            embed_dim=config.embed_dim,
            projection_hidden=config.projection_hidden,
            noise_std=config.noise_std,
            signal_amplitude=config.signal_amplitude,
            **layouts,
        )

    def layout(self, modality : str) -> ModalityLayout:
        return getattr(self, modality)

    @property
    def lengths(self) -> tuple[int, int, int]:
        return tuple(self.layout(m).tokens for m in MODALITIES)

    @property
    def total_tokens(self) -> int:
        return sum(self.lengths)

    def offset(self, modality : str) -> int:
        index = MODALITIES.index(modality)
        return sum(self.lengths[:index])

    @property
    def boundaries(self) -> list[tuple[int, int]]:
        """[start, stop) rows of each modality block in the concatenated sequence."""
        return [(self.offset(m), self.offset(m) + self.layout(m).tokens) for m in MODALITIES]

    def to_dict(self) -> dict:
        return {
            "embed_dim": self.embed_dim,
            "projection_hidden": self.projection_hidden,
            "noise_std": self.noise_std,
            "signal_amplitude": self.signal_amplitude,
            **{m: asdict(self.layout(m)) for m in MODALITIES},
        }

    @classmethod
    def from_dict(cls, data : dict) -> "StreamSettings":
        return cls(
            embed_dim=data["embed_dim"],
            projection_hidden=data["projection_hidden"],
            noise_std=data["noise_std"],
            signal_amplitude=data["signal_amplitude"],
            **{m: ModalityLayout(**data[m]) for m in MODALITIES},
        )
