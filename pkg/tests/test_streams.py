import math

import numpy as np
import pytest

from quartfuse.base.config import RunConfig
from quartfuse.misc.exceptions import ConfigError, FormatError, InputError
from quartfuse.numcore import Workspace, ops
from quartfuse.streams import (EOS, MODALITIES, EncoderParams, ProjectionParams, RawStream, Scenario, StreamSettings, TokenSequence, Vocabulary,
                               assemble, encode, gen_sample, init_stream_params, oracle_answer, project, read_stream, sinusoidal_positions,
                               window_starts)
from quartfuse.streams.dataset import Dataset

def test_vocabulary_answers(vocab):
    assert vocab.answer_ids == [17, 18, 19, 20]
    assert vocab.answer_tokens(0) == [17, EOS]
    assert vocab.answer_class([19, EOS]) == 2
    assert vocab.answer_class([19]) is None
    assert vocab.caption_query("audio") == [3, vocab.id("audio")]
    with pytest.raises(ConfigError):
        Vocabulary(10)
    with pytest.raises(InputError):
        vocab.id("banana")

def test_raw_stream_contract():
    with pytest.raises(InputError):
        RawStream("smell", np.zeros((2, 2)), 1.0)
    with pytest.raises(InputError):
        RawStream("audio", np.array([[np.nan]]), 1.0)
    with pytest.raises(InputError):
        RawStream("audio", np.zeros((0, 3)), 1.0)

def test_gen_sample_is_a_function_of_its_seed(settings, vocab):
    a = gen_sample(42, "off-camera-speech", settings, vocab)
    b = gen_sample(42, "off-camera-speech", settings, vocab)
    for m in MODALITIES:
        assert a.stream(m).frames.tobytes() == b.stream(m).frames.tobytes()
    assert a.answer_tokens == b.answer_tokens
    c = gen_sample(43, "off-camera-speech", settings, vocab)
    assert c.video.frames.tobytes() != a.video.frames.tobytes()

@pytest.mark.parametrize("scenario", ["visual-event", "off-camera-speech", "motion-only-event", "audio-visual-event"])
def test_labels_follow_the_scenario(scenario, quiet_settings, vocab):
    relevant = Scenario.lookup(scenario).RELEVANT
    for seed in range(10):
        sample = gen_sample(seed, scenario, quiet_settings, vocab)
        answer = vocab.answer_class(sample.answer_tokens)
        assert sample.relevant_modality == relevant
        assert sample.scenario_id == scenario
        assert oracle_answer(sample) == answer
        for m in MODALITIES:
            assert (sample.stream_labels[m] == answer) == (m in relevant)
        layout = quiet_settings.layout("video")
        assert sample.video.frames.shape == (layout.frames, layout.dim)

def test_window_starts():
    np.testing.assert_array_equal(window_starts(16, 2, 8), [0, 2, 4, 6, 8, 10, 12, 14])
    np.testing.assert_array_equal(window_starts(6, 2, 8), [0, 2, 4])
    with pytest.raises(InputError):
        window_starts(1, 2, 8)

def test_short_streams_are_padded(settings):
    ws = Workspace("f64")
    encoders, projections = init_stream_params(ws, settings, 0)
    stream = RawStream("video", np.ones((6, settings.video.dim)), 8.0)
    encoded, valid = encode(stream, encoders["video"])
    assert encoded.shape == [settings.video.tokens, settings.video.encoded_dim]
    assert valid == 3
    np.testing.assert_array_equal(encoded.data[3:], 0.0)
    sequence = project(encoded, projections["video"], 0, valid)
    assert sequence.tokens.shape == [settings.video.tokens, settings.embed_dim]
    np.testing.assert_array_equal(sequence.mask, [True] * 3 + [False] * 5)

def test_encoder_rejects_wrong_modality(settings):
    encoders, _ = init_stream_params(Workspace("f64"), settings, 0)
    with pytest.raises(InputError):
        encode(RawStream("audio", np.ones((24, settings.audio.dim)), 12.0), encoders["video"])

def test_sinusoidal_positions():
    pe = sinusoidal_positions([0, 1], 8)
    np.testing.assert_array_equal(pe[0, 0::2], 0.0)
    np.testing.assert_array_equal(pe[0, 1::2], 1.0)
    assert pe[1, 0] == pytest.approx(math.sin(1.0))
    assert pe[1, 1] == pytest.approx(math.cos(1.0))

def _blocks(ws, settings, seed=0):
    rng = np.random.default_rng(seed)
    blocks = []
    for m in MODALITIES:
        n = settings.layout(m).tokens
        offset = settings.offset(m)
        blocks.append(TokenSequence(m, ws.tensor(rng.normal(size=(n, settings.embed_dim))), list(range(offset, offset + n)), n))
    return blocks

def test_assemble_layout(settings):
    ws = Workspace("f64")
    zv, za, zs = _blocks(ws, settings)
    assembled = assemble(zv, za, zs, settings)
    assert assembled.length == 18
    assert assembled.boundaries == [(0, 8), (8, 14), (14, 18)]
    assert assembled.positions == list(range(18))
    assert assembled.mask.all()
    raw = ops.concat([zv.tokens, za.tokens, zs.tokens], axis=0).data
    np.testing.assert_allclose(assembled.Z.data - raw, sinusoidal_positions(range(18), settings.embed_dim), atol=1e-12)

def test_assemble_checks_block_sizes(settings):
    ws = Workspace("f64")
    zv, za, zs = _blocks(ws, settings)
    short = TokenSequence("audio", ws.zeros((5, settings.embed_dim)), list(range(8, 13)), 5)
    with pytest.raises(ConfigError):
        assemble(zv, short, zs, settings)
    with pytest.raises(ConfigError):
        assemble(za, zv, zs, settings)

def test_dataset_generation_covers_scenarios(tiny_config, settings, vocab):
    dataset = Dataset.generate(40, 1, settings, tiny_config.scenarios, vocab, threads=2)
    assert [s.sample_id for s in dataset] == list(range(40))
    assert {s.scenario_id for s in dataset} == set(tiny_config.scenarios)
    again = Dataset.generate(40, 1, settings, tiny_config.scenarios, vocab, threads=1)
    assert again.dataset_id == dataset.dataset_id
    with pytest.raises(InputError):
        Dataset.generate(0, 1, settings, tiny_config.scenarios, vocab)

def test_dataset_save_load(tmp_path, dataset):
    dataset.save(tmp_path / "data")
    loaded = Dataset.load(tmp_path / "data", verify=True)
    assert loaded.dataset_id == dataset.dataset_id
    assert loaded.settings == dataset.settings
    for a, b in zip(dataset, loaded):
        for m in MODALITIES:
            assert a.stream(m).frames.tobytes() == b.stream(m).frames.tobytes()

def test_tampered_dataset_fails_verification(tmp_path, dataset):
    dataset.save(tmp_path / "data")
    blob_file = tmp_path / "data" / "video.qtns"
    data = bytearray(blob_file.read_bytes())
    data[-1] ^= 0x80  # flips the sign of the last value
    blob_file.write_bytes(bytes(data))
    Dataset.load(tmp_path / "data")
    with pytest.raises(FormatError):
        Dataset.load(tmp_path / "data", verify=True)

def test_missing_dataset(tmp_path):
    with pytest.raises(FormatError):
        Dataset.load(tmp_path)

@pytest.fixture
def default_settings():
    return StreamSettings.from_config(RunConfig(env={}))

def test_oracle_reads_noisy_streams_perfectly(default_settings):
    vocab = Vocabulary()
    scenarios = Scenario.names()
    for seed in range(1000):
        sample = gen_sample(seed, scenarios[seed % len(scenarios)], default_settings, vocab, sample_id=seed)
        assert oracle_answer(sample) == vocab.answer_class(sample.answer_tokens)

@pytest.mark.parametrize("scenario", ["visual-event", "off-camera-speech", "motion-only-event", "audio-visual-event"])
def test_irrelevant_streams_do_not_reveal_the_answer(scenario, default_settings):
    vocab = Vocabulary()
    irrelevant = [m for m in MODALITIES if m not in Scenario.lookup(scenario).RELEVANT]
    hits = {m: 0 for m in irrelevant}
    for seed in range(500):
        sample = gen_sample(seed, scenario, default_settings, vocab)
        answer = vocab.answer_class(sample.answer_tokens)
        for m in irrelevant:
            hits[m] += read_stream(sample.stream(m)) == answer
    for m in irrelevant:
        assert hits[m] / 500 <= 0.25 + 0.05

def test_constant_stream_gives_identical_tokens(settings):
    encoders, _ = init_stream_params(Workspace("f64"), settings, 0)
    layout = settings.layout("audio")
    encoded, valid = encode(RawStream("audio", np.full((layout.frames, layout.dim), 0.7), 12.0), encoders["audio"])
    assert valid == layout.tokens
    np.testing.assert_array_equal(encoded.data, np.broadcast_to(encoded.data[0], encoded.data.shape))

def test_one_frame_per_token():
    ws = Workspace("f64")
    rng = np.random.default_rng(5)
    params = EncoderParams("sensor", frames_per_token=1, n_tokens=4, weight=ws.tensor(rng.normal(size=(3, 5))), bias=ws.tensor(rng.normal(size=5)))
    frames = rng.normal(size=(4, 3))
    encoded, valid = encode(RawStream("sensor", frames, 16.0), params)
    assert valid == 4
    np.testing.assert_allclose(encoded.data, np.maximum(frames @ params.weight.data + params.bias.data, 0.0), atol=1e-12)

@pytest.mark.parametrize("modality", MODALITIES)
def test_encode_matches_a_direct_computation(modality, settings, vocab):
    encoders, _ = init_stream_params(Workspace("f64"), settings, 3)
    params, layout = encoders[modality], settings.layout(modality)
    stream = gen_sample(11, "audio-visual-event", settings, vocab).stream(modality)
    expected = []
    for start in window_starts(stream.length, layout.frames_per_token, layout.tokens):
        window = stream.frames[start:start + layout.frames_per_token].reshape(-1)
        expected.append(np.maximum(window @ params.weight.data + params.bias.data, 0.0))
    encoded, _ = encode(stream, params)
    assert np.max(np.abs(encoded.data - np.array(expected))) < 1e-6

def test_zero_projection_gives_zero_tokens():
    ws = Workspace("f64")
    params = ProjectionParams("video", ws.zeros((4, 6)), ws.zeros((6,)), ws.zeros((6, 8)), ws.zeros((8,)))
    sequence = project(ws.tensor(np.random.default_rng(0).normal(size=(5, 4))), params)
    np.testing.assert_array_equal(sequence.tokens.data, 0.0)
    assert sequence.valid == 5

def test_identity_projection_passes_tokens_through():
    ws = Workspace("f64")
    params = ProjectionParams("audio", ws.tensor(np.eye(6)), ws.zeros((6,)), ws.tensor(np.eye(6)), ws.zeros((6,)))
    encoded = np.abs(np.random.default_rng(1).normal(size=(4, 6)))
    sequence = project(ws.tensor(encoded), params, offset=8)
    np.testing.assert_array_equal(sequence.tokens.data, encoded)
    assert sequence.global_positions == [8, 9, 10, 11]
