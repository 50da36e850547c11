"""
Stream perturbations.

The functional forms (add_noise, reverse, ...) take an explicit seed. The catalog classes
wrap them for the mismatch generator: each is called with a stream, a generator and the
sample context, and returns the new stream plus the parameters it used.
"""
from dataclasses import dataclass
import logging

import numpy as np

from ..base.registry import Registered
from ..misc.exceptions import ConfigError, InputError
from ..misc.seeds import rng_for
from ..streams import MODALITIES, RawStream

logger = logging.getLogger(__name__)

FRAME_DROPOUT_RATE = 0.25

################################################################################
# Functional forms
################################################################################

def _noise(rng : np.random.Generator, frames : np.ndarray, sigma_rel : float) -> tuple[np.ndarray, np.ndarray]:
    if sigma_rel <= 0:
        raise ConfigError("sigma_rel", f"must be positive, got {sigma_rel}")
    std = frames.std(axis=0)
    noise = rng.standard_normal(frames.shape) * (sigma_rel * std)
    # zero-variance channels get exactly zero noise
    noise[:, std == 0] = 0.0
    return frames + noise, std

def add_noise(stream : RawStream, sigma_rel : float, seed : int) -> RawStream:
    """in + N(0, (σ_rel · per-channel std)²)."""
    frames, _ = _noise(rng_for(seed, "add-noise"), stream.frames, sigma_rel)
    return stream.with_frames(frames)

def add_jitter(stream : RawStream, sigma_rel : float, seed : int) -> RawStream:
    """Zero-centred Gaussian jitter scaled by the empirical per-channel std; the sensor counterpart of add_noise."""
    frames, _ = _noise(rng_for(seed, "add-jitter"), stream.frames, sigma_rel)
    return stream.with_frames(frames)

def reverse(stream : RawStream) -> RawStream:
    return stream.with_frames(stream.frames[::-1].copy())

def _replacement_index(samples, source_id : int, rng : np.random.Generator) -> int:
    others = [i for i, s in enumerate(samples) if s.sample_id != source_id]
    if len(others) < 1 or len(samples) < 2:
        raise InputError("replacement needs a dataset with at least two samples")
    return others[int(rng.integers(len(others)))]

def replace_with_irrelevant(stream : RawStream, dataset, seed : int, source_id : int) -> RawStream:
    """The same-modality stream of a uniformly drawn other sample."""
    partner = dataset[_replacement_index(dataset, source_id, rng_for(seed, "replace"))]
    return _checked_replacement(stream, partner.stream(stream.modality))

def _checked_replacement(stream : RawStream, replacement : RawStream) -> RawStream:
    if replacement.frames.shape != stream.frames.shape:
        raise InputError(f"replacement {stream.modality} stream has shape {replacement.frames.shape}, expected {stream.frames.shape}")
    return stream.with_frames(replacement.frames.copy())

def _jitter_frames(rng : np.random.Generator, frames : np.ndarray) -> np.ndarray:
    n = frames.shape[0]
    return frames[np.clip(np.arange(n) + rng.integers(-1, 2, size=n), 0, n - 1)]

def _dropout_frames(rng : np.random.Generator, frames : np.ndarray, rate : float) -> tuple[np.ndarray, np.ndarray]:
    frames = frames.copy()
    dropped = np.flatnonzero(rng.random(frames.shape[0]) < rate)
    for t in dropped:
        frames[t] = frames[t - 1] if t > 0 else 0.0
    return frames, dropped

def frame_jitter(stream : RawStream, seed : int) -> RawStream:
    """Each frame is swapped for one of its temporal neighbours (offset −1, 0 or +1, clipped)."""
    return stream.with_frames(_jitter_frames(rng_for(seed, "frame-jitter"), stream.frames))

def frame_dropout(stream : RawStream, seed : int, rate : float = FRAME_DROPOUT_RATE) -> RawStream:
    """Dropped frames repeat the last kept frame; a dropped first frame becomes zeros."""
    frames, _ = _dropout_frames(rng_for(seed, "frame-dropout"), stream.frames, rate)
    return stream.with_frames(frames)

################################################################################
# Catalog
################################################################################

@dataclass
class OpContext:
    """What an op may look at besides the stream itself."""
    sample_id: int
    dataset: object
    sigma_rel: float

class PerturbationOp(Registered):
    """Base class of the perturbation catalog."""

    CATALOG_ROOT = True
    DISPLAY_NAME = "Perturbation op"
    UNIQUE_NAME = "quartfuse.core.perturbation-op-abstract-base-class"
    VERSION = "0.1"

    APPLIES_TO : tuple = MODALITIES
    CHANGES_STREAM : bool = True

    def __call__(self, stream : RawStream, rng : np.random.Generator, context : OpContext) -> tuple[RawStream, dict]:
        raise NotImplementedError

class AddNoise(PerturbationOp):
    DISPLAY_NAME = "Add noise"
    UNIQUE_NAME = "add-noise"
    VERSION = "0.1"

    def __call__(self, stream, rng, context):
        frames, std = _noise(rng, stream.frames, context.sigma_rel)
        return stream.with_frames(frames), {"sigma_rel": context.sigma_rel, "sigma_mean": float((context.sigma_rel * std).mean())}

class AddJitter(PerturbationOp):
    DISPLAY_NAME = "Add jitter"
    UNIQUE_NAME = "add-jitter"
    VERSION = "0.1"
    APPLIES_TO = ("sensor",)

    def __call__(self, stream, rng, context):
        frames, std = _noise(rng, stream.frames, context.sigma_rel)
        return stream.with_frames(frames), {"sigma_rel": context.sigma_rel, "sigma_mean": float((context.sigma_rel * std).mean())}

class Reverse(PerturbationOp):
    DISPLAY_NAME = "Temporal reversal"
    UNIQUE_NAME = "reverse"
    VERSION = "0.1"

    def __call__(self, stream, rng, context):
        return reverse(stream), {}

class ReplaceWithIrrelevant(PerturbationOp):
    DISPLAY_NAME = "Replace with irrelevant"
    UNIQUE_NAME = "replace-with-irrelevant"
    VERSION = "0.1"

    def __call__(self, stream, rng, context):
        if context.dataset is None:
            raise InputError("replace-with-irrelevant needs a dataset to draw from")
        index = _replacement_index(context.dataset, context.sample_id, rng)
        partner = context.dataset[index]
        return _checked_replacement(stream, partner.stream(stream.modality)), {"source_id": partner.sample_id}

class NoPerturbation(PerturbationOp):
    DISPLAY_NAME = "No perturbation"
    UNIQUE_NAME = "no-perturbation"
    VERSION = "0.1"
    CHANGES_STREAM = False

    def __call__(self, stream, rng, context):
        return stream, {}

class FrameJitter(PerturbationOp):
    DISPLAY_NAME = "Frame jitter"
    UNIQUE_NAME = "frame-jitter"
    VERSION = "0.1"
    APPLIES_TO = ("video",)

    def __call__(self, stream, rng, context):
        return stream.with_frames(_jitter_frames(rng, stream.frames)), {}

class FrameDropout(PerturbationOp):
    DISPLAY_NAME = "Frame dropout"
    UNIQUE_NAME = "frame-dropout"
    VERSION = "0.1"
    APPLIES_TO = ("video",)

    def __call__(self, stream, rng, context):
        frames, dropped = _dropout_frames(rng, stream.frames, FRAME_DROPOUT_RATE)
        return stream.with_frames(frames), {"rate": FRAME_DROPOUT_RATE, "dropped": dropped.tolist()}
