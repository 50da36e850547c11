"""Synthetic synchronised streams, their encoders and projections, and the unified token matrix."""
from .types import MODALITIES, MODALITY_LETTERS, ModalityLayout, MultimodalSample, RawStream, StreamSettings, TokenSequence
from .vocab import ANSWER_WORDS, BOS, EOS, PAD, Vocabulary
from .scenarios import Scenario
from .generator import gen_sample, oracle_answer, read_stream
from .encoders import EncoderParams, ProjectionParams, encode, init_stream_params, project, window_starts
from .assemble import Assembled, assemble, sinusoidal_positions
from .dataset import Dataset
