"""
Checkpoint files.

Layout: magic "QCKP", u32 format version, u64 header length, a JSON header (sorted keys,
compact separators), then the blob region holding one QTNS blob per parameter and
optimizer moment. The header indexes every blob by [offset, length] into the region and
carries its SHA-256, so truncation and corruption are detected on load.
"""
from dataclasses import dataclass, field
from pathlib import Path
import hashlib
import io
import json
import logging
import struct

import numpy as np

from ..base.run_dir import CheckpointWriteSession
from ..misc.exceptions import ConfigError, FormatError, IntegrityError
from ..numcore import read_array, write_array

logger = logging.getLogger(__name__)

MAGIC = b"QCKP"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<4sIQ")

# Keys that fix parameter shapes; a checkpoint only loads under a config that agrees on all of them.
SHAPE_KEYS = (
    "embed_dim", "quart_heads", "quart_head_dim", "vocab_size", "decoder_layers", "decoder_heads", "decoder_mlp_hidden",
    "projection_hidden", "lora_rank", "precision",
    "video_tokens", "audio_tokens", "sensor_tokens", "video_frames_per_token", "audio_frames_per_token", "sensor_frames_per_token",
    "video_dim", "audio_dim", "sensor_dim", "video_encoded_dim", "audio_encoded_dim", "sensor_encoded_dim",
)

@dataclass
class Checkpoint:
    """Parameters, optimizer state and provenance at one point of one stage."""
    stage: str
    step: int
    complete: bool
    config: dict
    params: dict[str, np.ndarray]
    moments: dict[str, np.ndarray] = field(default_factory=dict)
    optimizer_steps: dict[str, int] = field(default_factory=dict)
    stage_config: dict | None = None
    context: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    def header(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "stage": self.stage,
            "step": self.step,
            "complete": self.complete,
            "config": self.config,
            "stage_config": self.stage_config,
            "context": self.context,
            "metrics": self.metrics,
            "optimizer_steps": self.optimizer_steps,
            "rng": {"seed": self.config.get("seed", 0), "next_step": self.step},
        }

    def to_bytes(self) -> bytes:
        region = io.BytesIO()
        tensors = {name: list(write_array(region, self.params[name])) for name in sorted(self.params)}
        moments = {name: list(write_array(region, self.moments[name])) for name in sorted(self.moments)}
        blobs = region.getvalue()
        header = self.header()
        header.update(tensors=tensors, moments=moments, blob_bytes=len(blobs), blob_sha256=hashlib.sha256(blobs).hexdigest())
        encoded = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf8")
        return _PREAMBLE.pack(MAGIC, FORMAT_VERSION, len(encoded)) + encoded + blobs

    @classmethod
    def from_bytes(cls, buffer : bytes) -> "Checkpoint":
        if len(buffer) < _PREAMBLE.size:
            raise IntegrityError(f"checkpoint is {len(buffer)} bytes, shorter than its preamble")
        magic, version, header_length = _PREAMBLE.unpack_from(buffer)
        if magic != MAGIC:
            raise FormatError(f"bad checkpoint magic {magic!r}")
        if version != FORMAT_VERSION:
            raise FormatError(f"checkpoint format version {version} is not supported (expected {FORMAT_VERSION})")
        start = _PREAMBLE.size + header_length
        if len(buffer) < start:
            raise IntegrityError("checkpoint header is truncated")
        try:
            header = json.loads(buffer[_PREAMBLE.size:start].decode("utf8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise FormatError(f"checkpoint header is not valid JSON: {e}") from e

        blobs = buffer[start:]
        if len(blobs) != header["blob_bytes"]:
            raise IntegrityError(f"checkpoint blob region is {len(blobs)} bytes, header says {header['blob_bytes']}")
        if hashlib.sha256(blobs).hexdigest() != header["blob_sha256"]:
            raise IntegrityError("checkpoint blob region does not match its checksum")

        return cls(
            stage=header["stage"],
            step=header["step"],
            complete=header["complete"],
            config=header["config"],
            params={name: read_array(blobs, *span) for name, span in header["tensors"].items()},
            moments={name: read_array(blobs, *span) for name, span in header["moments"].items()},
            optimizer_steps=header["optimizer_steps"],
            stage_config=header["stage_config"],
            context=header["context"],
            metrics=header["metrics"],
        )

    @property
    def checkpoint_id(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()[:16]

    def check_compatible(self, config : dict, ignore=()) -> None:
        """A ConfigError naming the first shape-determining key on which config and checkpoint disagree."""
        for key in SHAPE_KEYS:
            if key not in ignore and key in self.config and self.config[key] != config.get(key):
                raise ConfigError(key, f"checkpoint was trained with {key}={self.config[key]!r}, config has {config.get(key)!r}")

def checkpoint_save(checkpoint : Checkpoint, path : Path) -> None:
    with CheckpointWriteSession(Path(path)) as f:
        f.write(checkpoint.to_bytes())

def checkpoint_load(path : Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        logger.error(f"Checkpoint {path} missing.")
        raise FormatError(f"checkpoint {path} does not exist")
    return Checkpoint.from_bytes(path.read_bytes())
