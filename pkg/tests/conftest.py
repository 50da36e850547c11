"""Shared fixtures: a tiny 64-bit configuration and the data and models built from it."""
from dataclasses import replace

import pytest

from quartfuse.base.config import RunConfig
from quartfuse.numcore import Workspace
from quartfuse.pipeline import FusionModel
from quartfuse.streams import StreamSettings, Vocabulary
from quartfuse.streams.dataset import Dataset

TINY = {
    "precision": "f64",
    "threads": 1,
    "log_every": 1,
    "embed_dim": 8,
    "quart_heads": 2,
    "quart_head_dim": 4,
    "vocab_size": 24,
    "decoder_layers": 1,
    "decoder_heads": 2,
    "decoder_mlp_hidden": 16,
    "projection_hidden": 8,
    "video_dim": 8,
    "audio_dim": 4,
    "sensor_dim": 4,
    "video_encoded_dim": 8,
    "audio_encoded_dim": 8,
    "sensor_encoded_dim": 8,
    "stage1_steps": 2,
    "stage2_steps": 2,
    "stage3_steps": 2,
    "batch_size": 2,
    "lora_rank": 2,
    "train_size": 8,
    "eval_size": 4,
}

@pytest.fixture
def tiny_config() -> RunConfig:
    return RunConfig(env={}, overrides=dict(TINY))

@pytest.fixture
def settings(tiny_config) -> StreamSettings:
    return StreamSettings.from_config(tiny_config)

@pytest.fixture
def quiet_settings(settings) -> StreamSettings:
    """Noise-free streams: the planted burst alone decides every channel mean."""
    return replace(settings, noise_std=0.0)

@pytest.fixture
def vocab() -> Vocabulary:
    return Vocabulary(24)

@pytest.fixture
def dataset(tiny_config, settings, vocab) -> Dataset:
    return Dataset.generate(8, 7, settings, tiny_config.scenarios, vocab)

@pytest.fixture
def ws() -> Workspace:
    return Workspace("f64")

@pytest.fixture
def model(tiny_config) -> FusionModel:
    return FusionModel.from_config(tiny_config)
