import math

import numpy as np
import pytest

from quartfuse.misc.exceptions import ConfigError, ContractError
from quartfuse.numcore import Workspace, grad_check, ops
from quartfuse.quart import QuartConfig, RelevanceScores, alpha_entropy, attend, forward, fuse, init_quart, modality_mass, relevance, zero_relevance_head
from quartfuse.streams import MODALITIES, TokenSequence

E, L = 8, 18
BOUNDARIES = [(0, 8), (8, 14), (14, 18)]

@pytest.fixture
def params(ws):
    return init_quart(ws, QuartConfig(heads=2, head_dim=4, embed_dim=E, total_tokens=L), seed=0)

def _tokens(ws, settings, seed=0):
    rng = np.random.default_rng(seed)
    blocks = []
    for m in MODALITIES:
        n, offset = settings.layout(m).tokens, settings.offset(m)
        blocks.append(TokenSequence(m, ws.tensor(rng.normal(size=(n, E))), list(range(offset, offset + n)), n))
    return blocks, ws.tensor(rng.normal(size=(3, E)))

def test_config_checks():
    with pytest.raises(ConfigError):
        QuartConfig(heads=3, head_dim=4, embed_dim=E, total_tokens=L)
    with pytest.raises(ConfigError):
        QuartConfig(heads=2, head_dim=4, embed_dim=E, total_tokens=L, pooling="median")

def test_attend_shapes(ws, params):
    Z = ws.tensor(np.random.default_rng(0).normal(size=(L, E)))
    out = attend(ws.tensor(np.ones((3, E))), Z, params)
    assert out.M.shape == [3, E]
    assert len(out.weights) == 2
    for a in out.weights:
        assert a.shape == (3, L)
        np.testing.assert_allclose(a.sum(axis=1), 1.0, atol=1e-12)

def test_zero_relevance_head_gives_uniform_alpha(ws, params, settings):
    zero_relevance_head(params)
    (zv, za, zs), zq = _tokens(ws, settings)
    out = forward(zq, zv, za, zs, params, settings)
    np.testing.assert_allclose(out.alpha.values, np.full(L, 1 / L), atol=1e-12)
    np.testing.assert_allclose(modality_mass(out.alpha), (8 / 18, 6 / 18, 4 / 18), atol=1e-12)
    assert alpha_entropy(out.alpha) == pytest.approx(math.log(18))

def test_alpha_is_a_distribution_and_context_is_convex(ws, params, settings):
    (zv, za, zs), zq = _tokens(ws, settings, seed=3)
    out = forward(zq, zv, za, zs, params, settings)
    alpha = out.alpha.values
    assert np.all(alpha >= 0)
    assert alpha.sum() == pytest.approx(1.0, abs=1e-6)
    assert out.context.shape == [1, E]
    np.testing.assert_allclose(out.context.data.reshape(-1), alpha @ out.assembled.Z.data, atol=1e-12)
    assert sum(modality_mass(out.alpha)) == pytest.approx(1.0, abs=1e-6)

def test_raw_mode_passes_every_row(ws, params, settings):
    (zv, za, zs), zq = _tokens(ws, settings)
    out = forward(zq, zv, za, zs, params, settings, mode="raw")
    assert out.alpha is None
    assert out.context.shape == [L, E]
    with pytest.raises(ConfigError):
        forward(zq, zv, za, zs, params, settings, mode="fused")

def test_dropped_modality_is_renormalised(ws, params, settings):
    (zv, za, zs), zq = _tokens(ws, settings)
    out = forward(zq, zv, za, zs, params, settings, dropped=("audio",))
    masses = modality_mass(out.alpha)
    assert masses[1] == 0.0
    assert sum(masses) == pytest.approx(1.0, abs=1e-6)

def test_dropped_modality_without_renormalising(ws, params, settings):
    (zv, za, zs), zq = _tokens(ws, settings)
    out = forward(zq, zv, za, zs, params, settings, dropped=("audio", "sensor"), renormalize=False)
    masses = modality_mass(out.alpha)
    assert not out.alpha.normalized
    assert masses[1] == masses[2] == 0.0
    assert 0 < sum(masses) < 1

def test_token_count_must_match_relevance_head(ws, settings):
    params = init_quart(ws, QuartConfig(heads=2, head_dim=4, embed_dim=E, total_tokens=L + 1), seed=0)
    (zv, za, zs), zq = _tokens(ws, settings)
    with pytest.raises(ConfigError):
        forward(zq, zv, za, zs, params, settings)

@pytest.mark.parametrize("pooling", ["mean", "last", "max"])
def test_relevance_pooling_respects_mask(ws, pooling):
    rng = np.random.default_rng(1)
    mask = np.ones(L, dtype=bool)
    mask[5] = False
    alpha = relevance(ws.tensor(rng.normal(size=(3, E))), ws.tensor(rng.normal(size=(E, L))), BOUNDARIES, pooling, mask)
    assert alpha.values[5] == 0.0
    assert alpha.values.sum() == pytest.approx(1.0)

def test_permuting_tokens_permutes_alpha(ws, params):
    rng = np.random.default_rng(2)
    Z, zq = rng.normal(size=(L, E)), ws.tensor(rng.normal(size=(2, E)))
    perm = rng.permutation(L)

    M = attend(zq, ws.tensor(Z), params).M
    alpha = relevance(M, params.w_r, BOUNDARIES)
    context = fuse(alpha, ws.tensor(Z)).c

    M_perm = attend(zq, ws.tensor(Z[perm]), params).M
    alpha_perm = relevance(M_perm, ws.tensor(params.w_r.data[:, perm]), BOUNDARIES)
    context_perm = fuse(alpha_perm, ws.tensor(Z[perm])).c

    np.testing.assert_allclose(M_perm.data, M.data, atol=1e-12)
    np.testing.assert_allclose(alpha_perm.values, alpha.values[perm], atol=1e-12)
    np.testing.assert_allclose(context_perm.data, context.data, atol=1e-12)

def test_modality_mass_needs_a_partition(ws):
    alpha = RelevanceScores(ws.tensor(np.full((1, L), 1 / L)), BOUNDARIES)
    with pytest.raises(ContractError):
        modality_mass(alpha, [(0, 8), (9, 14), (14, 18)])

def test_one_hot_alpha_has_zero_entropy(ws):
    one_hot = np.zeros((1, L))
    one_hot[0, 4] = 1.0
    scores = RelevanceScores(ws.tensor(one_hot), BOUNDARIES)
    assert alpha_entropy(scores) == 0.0
    assert modality_mass(scores) == (1.0, 0.0, 0.0)

def test_fuse_rejects_non_distributions(ws):
    with pytest.raises(ContractError):
        fuse(RelevanceScores(ws.tensor(np.full((1, L), 0.1)), BOUNDARIES), ws.zeros((L, E)))

def test_gating_gradients(settings):
    ws = Workspace("f64")
    params = init_quart(ws, QuartConfig(heads=2, head_dim=4, embed_dim=E, total_tokens=L), seed=5)
    (zv, za, zs), zq = _tokens(ws, settings, seed=5)
    direction = ws.tensor(np.random.default_rng(5).normal(size=(1, E)))

    def objective():
        out = forward(zq, zv, za, zs, params, settings)
        return ops.add(ops.sum(ops.mul(out.context, direction)), ops.sum(ops.xlogx(out.alpha.alpha)))

    assert grad_check(objective, list(params.parameters().values())) < 1e-5

def _direct_gating(zq, Z, params):
    """α and c written out with plain numpy, one head at a time."""
    heads = []
    for h in range(params.config.heads):
        q, k, v = zq @ params.w_q[h].data, Z @ params.w_k[h].data, Z @ params.w_v[h].data
        logits = q @ k.T / math.sqrt(params.config.head_dim)
        weights = np.exp(logits - logits.max(axis=1, keepdims=True))
        heads.append(weights / weights.sum(axis=1, keepdims=True) @ v)
    scores = (np.concatenate(heads, axis=1) @ params.w_o.data @ params.w_r.data).mean(axis=0)
    alpha = np.exp(scores - scores.max())
    alpha /= alpha.sum()
    return alpha, alpha @ Z

@pytest.mark.parametrize("seed", range(10))
def test_forward_matches_direct_formula(seed, settings):
    ws = Workspace("f64")
    params = init_quart(ws, QuartConfig(heads=2, head_dim=4, embed_dim=E, total_tokens=L), seed=seed)
    params.w_r.data[...] = np.random.default_rng(seed).normal(size=(E, L))
    (zv, za, zs), zq = _tokens(ws, settings, seed=seed)
    out = forward(zq, zv, za, zs, params, settings)
    alpha, c = _direct_gating(zq.data, out.assembled.Z.data, params)
    np.testing.assert_allclose(out.alpha.values, alpha, atol=1e-9)
    np.testing.assert_allclose(out.context.data.reshape(-1), c, atol=1e-9)

def test_fused_context_stays_inside_the_token_range(settings):
    ws = Workspace("f64")
    params = init_quart(ws, QuartConfig(heads=2, head_dim=4, embed_dim=E, total_tokens=L), seed=0)
    for seed in range(200):
        params.w_r.data[...] = np.random.default_rng(seed).normal(scale=3.0, size=(E, L))
        (zv, za, zs), zq = _tokens(ws, settings, seed=seed)
        out = forward(zq, zv, za, zs, params, settings)
        Z, c = out.assembled.Z.data, out.context.data.reshape(-1)
        assert np.all(out.alpha.values >= 0)
        assert abs(out.alpha.values.sum() - 1) <= 1e-6
        assert np.all(c >= Z.min(axis=0) - 1e-12) and np.all(c <= Z.max(axis=0) + 1e-12)

def test_relevance_head_does_not_touch_attention(ws, params, settings):
    (zv, za, zs), zq = _tokens(ws, settings, seed=7)
    params.w_r.data[...] = np.random.default_rng(1).normal(size=(E, L))
    before = forward(zq, zv, za, zs, params, settings)
    params.w_r.data[...] = np.random.default_rng(2).normal(size=(E, L))
    after = forward(zq, zv, za, zs, params, settings)
    for a, b in zip(before.attention.weights, after.attention.weights):
        assert np.array_equal(a, b)
    assert np.array_equal(before.attention.M.data, after.attention.M.data)
    assert not np.allclose(before.alpha.values, after.alpha.values)

def test_single_token_gets_all_attention(ws, params):
    out = attend(ws.tensor(np.random.default_rng(3).normal(size=(3, E))), ws.tensor(np.ones((1, E))), params)
    for a in out.weights:
        np.testing.assert_array_equal(a, 1.0)

def test_identical_tokens_get_uniform_attention(ws, params):
    row = np.random.default_rng(4).normal(size=(1, E))
    out = attend(ws.tensor(np.random.default_rng(5).normal(size=(2, E))), ws.tensor(np.repeat(row, L, axis=0)), params)
    for a in out.weights:
        np.testing.assert_allclose(a, 1 / L, atol=1e-15)
