"""
Synthetic synchronised video/audio/sensor samples with a known relevant modality.

Answer k is planted as a burst on the channels c with c % 4 == k, covering at least
half of the stream. Relevant streams carry the true answer. Every other stream carries
a different answer, so distractors disagree with the truth rather than being silent.
"""
import logging

import numpy as np

from ..misc.seeds import rng_for
from .scenarios import Scenario
from .types import MODALITIES, MultimodalSample, RawStream, StreamSettings
from .vocab import ANSWER_WORDS, Vocabulary

logger = logging.getLogger(__name__)

N_ANSWERS = len(ANSWER_WORDS)

def gen_sample(seed : int, scenario : str, settings : StreamSettings, vocab : Vocabulary | None = None, sample_id : int = 0) -> MultimodalSample:
    """Generate one sample; the seed alone determines every stream and label."""
    scenario_cls = Scenario.lookup(scenario, "scenario")
    vocab = vocab or Vocabulary()
    rng = rng_for(seed, "streams")

    answer = int(rng.integers(N_ANSWERS))
    template = scenario_cls.QUERY_TEMPLATES[int(rng.integers(len(scenario_cls.QUERY_TEMPLATES)))]

    streams, labels = {}, {}
    for modality in MODALITIES:
        if modality in scenario_cls.RELEVANT:
            planted = answer
        else:
            planted = int(rng.choice([a for a in range(N_ANSWERS) if a != answer]))
        layout = settings.layout(modality)
        frames = plant_signal(rng, layout.frames, layout.dim, planted, settings.noise_std, settings.signal_amplitude)
        streams[modality] = RawStream(modality=modality, frames=frames, sample_rate=layout.sample_rate)
        labels[modality] = planted

    return MultimodalSample(
        sample_id=sample_id,
        query_tokens=vocab.ids(template),
        answer_tokens=vocab.answer_tokens(answer),
        relevant_modality=scenario_cls.RELEVANT,
        scenario_id=scenario_cls.UNIQUE_NAME,
        seed=seed,
        stream_labels=labels,
        **streams,
    )

def plant_signal(rng : np.random.Generator, length : int, dim : int, answer : int, noise_std : float, amplitude : float) -> np.ndarray:
    """Gaussian noise plus a burst on answer's channel group over a window of at least half the frames."""
    frames = rng.normal(0.0, noise_std, size=(length, dim)) if noise_std > 0 else np.zeros((length, dim))
    burst = int(rng.integers((length + 1) // 2, length + 1))
    start = int(rng.integers(0, length - burst + 1))
    frames[start:start + burst, channel_group(dim, answer)] += amplitude
    return frames

def channel_group(dim : int, answer : int) -> np.ndarray:
    return np.arange(dim)[np.arange(dim) % N_ANSWERS == answer]

def read_stream(stream : RawStream) -> int:
    """The hand-written oracle: the answer whose channel group has the largest mean."""
    means = [stream.frames[:, channel_group(stream.dim, k)].mean() for k in range(N_ANSWERS)]
    return int(np.argmax(means))

def oracle_answer(sample : MultimodalSample) -> int:
    """Answer a sample by reading only its relevant streams."""
    votes = [read_stream(sample.stream(m)) for m in MODALITIES if m in sample.relevant_modality]
    return int(np.bincount(votes, minlength=N_ANSWERS).argmax())
