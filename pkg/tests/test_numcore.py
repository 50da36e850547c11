import struct

import numpy as np
import pytest

from quartfuse.misc.exceptions import ContractError, DimensionError, DomainError, FormatError, IntegrityError, PrecisionError
from quartfuse.misc.seeds import rng_for
from quartfuse.numcore import Workspace, backward, decode_array, encode_array, grad_check, ops

def test_matmul_identity_and_hand_example(ws):
    x = ws.tensor(np.arange(6.0).reshape(3, 2))
    np.testing.assert_array_equal(ops.matmul(ws.tensor(np.eye(3)), x).data, x.data)
    product = ops.matmul(ws.tensor([[1.0, 2.0], [3.0, 4.0]]), ws.tensor([[1.0], [1.0]]))
    np.testing.assert_array_equal(product.data, [[3.0], [7.0]])

def test_matmul_against_triple_loop(ws):
    rng = rng_for(3, "matmul")
    a, b = rng.normal(size=(5, 4)), rng.normal(size=(4, 2))
    expected = np.zeros((5, 2))
    for i in range(5):
        for j in range(2):
            for k in range(4):
                expected[i, j] += a[i, k] * b[k, j]
    assert np.max(np.abs(ops.matmul(ws.tensor(a), ws.tensor(b)).data - expected)) < 1e-12

def test_matmul_shape_mismatch_names_both_shapes(ws):
    with pytest.raises(DimensionError, match=r"\[2, 3\].*\[2, 3\]"):
        ops.matmul(ws.zeros((2, 3)), ws.zeros((2, 3)))

def test_no_implicit_broadcasting(ws):
    with pytest.raises(DimensionError):
        ops.add(ws.zeros((2, 3)), ws.zeros((1, 3)))

def test_softmax_uniform_and_stable(ws):
    np.testing.assert_allclose(ops.softmax(ws.zeros((1, 4)), axis=1).data, [[0.25] * 4])
    out = ops.softmax(ws.tensor([[1000.0, 0.0]]), axis=1).data
    assert np.all(np.isfinite(out))
    np.testing.assert_array_equal(out, [[1.0, 0.0]])

def test_softmax_matches_formula_and_sums_to_one(ws):
    x = rng_for(5, "softmax").normal(size=(3, 7))
    out = ops.softmax(ws.tensor(x), axis=1).data
    expected = np.exp(x) / np.exp(x).sum(axis=1, keepdims=True)
    assert np.max(np.abs(out - expected) / expected) < 1e-12
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-6)

def test_masked_softmax(ws):
    mask = np.array([[True, False, True]])
    out = ops.softmax(ws.tensor([[1.0, 5.0, 1.0]]), axis=1, mask=mask).data
    np.testing.assert_array_equal(out, [[0.5, 0.0, 0.5]])
    with pytest.raises(ContractError):
        ops.softmax(ws.zeros((1, 3)), axis=1, mask=np.zeros((1, 3), dtype=bool))

def test_elementwise_examples(ws):
    x = rng_for(1, "log").uniform(0.5, 2.0, size=(4,))
    roundtrip = ops.log(ops.exp(ws.tensor(x))).data
    assert np.max(np.abs(roundtrip - x) / x) < 1e-12
    assert ops.concat([ws.zeros((2, 3)), ws.zeros((4, 3))], axis=0).shape == [6, 3]
    np.testing.assert_array_equal(ops.sum(ws.ones((3, 5)), axis=1).data, [5.0, 5.0, 5.0])

def test_elementwise_errors(ws):
    with pytest.raises(DomainError):
        ops.log(ws.tensor([1.0, 0.0]))
    with pytest.raises(DimensionError):
        ops.concat([ws.zeros((2, 3)), ws.zeros((2, 4))], axis=0)

def test_xlogx_zero_convention(ws):
    np.testing.assert_array_equal(ops.xlogx(ws.tensor([0.0, 1.0])).data, [0.0, 0.0])

def test_backward_linear_and_quadratic(ws):
    x = ws.tensor([1.0, -2.0, 3.0], requires_grad=True)
    backward(ops.sum(x))
    np.testing.assert_array_equal(x.grad, np.ones(3))

    y = ws.tensor([1.0, -2.0, 3.0], requires_grad=True)
    backward(ops.sum(ops.mul(y, y)))
    np.testing.assert_array_equal(y.grad, 2 * y.data)

def test_backward_accumulates_additively(ws):
    x = ws.tensor([1.0, 2.0], requires_grad=True)
    backward(ops.sum(x))
    backward(ops.sum(x))
    np.testing.assert_array_equal(x.grad, [2.0, 2.0])

def test_backward_sums_paths_of_a_reused_tensor(ws):
    x = ws.tensor([0.5, 1.5], requires_grad=True)
    h = ops.exp(x)
    backward(ops.sum(ops.add(ops.mul(h, h), h)))
    np.testing.assert_allclose(x.grad, 2 * np.exp(2 * x.data) + np.exp(x.data))

def test_backward_contract_errors(ws):
    x = ws.tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ContractError):
        backward(ops.scale(x, 2.0))
    with pytest.raises(ContractError):
        backward(ops.sum(ws.tensor([1.0, 2.0])))

def test_no_grad_records_nothing(ws):
    x = ws.tensor([1.0], requires_grad=True)
    with ws.no_grad():
        y = ops.exp(x)
    assert not y.requires_grad
    assert ws.tape == []

def test_precisions_never_mix():
    a, b = Workspace("f32").zeros((2,)), Workspace("f64").zeros((2,))
    with pytest.raises(PrecisionError):
        ops.add(a, b)
    with pytest.raises(PrecisionError):
        Workspace("f16")

def test_grad_check_sum_of_squares(ws):
    x = ws.tensor(rng_for(0, "sq").normal(size=(3, 4)), requires_grad=True)
    assert grad_check(lambda: ops.sum(ops.mul(x, x)), [x]) < 1e-9

def test_grad_check_softmax_cross_entropy(ws):
    logits = ws.tensor(rng_for(0, "ce").normal(size=(1, 4)), requires_grad=True)
    target = ws.tensor([[0.0, 0.0, 1.0, 0.0]])
    assert grad_check(lambda: ops.scale(ops.sum(ops.mul(ops.log_softmax(logits, axis=1), target)), -1.0), [logits]) < 1e-7

def test_grad_check_rejects_32_bit_and_bad_eps():
    x = Workspace("f32").ones((2,), requires_grad=True)
    with pytest.raises(PrecisionError):
        grad_check(lambda: ops.sum(x), [x])
    y = Workspace("f64").ones((2,), requires_grad=True)
    with pytest.raises(ContractError):
        grad_check(lambda: ops.sum(y), [y], eps=1e-2)

def _unary_cases(ws, rng):
    positive = rng.uniform(0.5, 2.0, size=(3, 4))
    signed = rng.normal(size=(3, 4))
    signed[np.abs(signed) < 0.1] += 0.5
    other = rng.normal(size=(4, 3))
    table = rng.normal(size=(6, 4))
    return {
        "matmul": (signed, lambda x: ops.matmul(x, ws.tensor(other))),
        "transpose": (signed, ops.transpose),
        "log": (positive, ops.log),
        "exp": (signed, ops.exp),
        "relu": (signed, ops.relu),
        "xlogx": (positive, ops.xlogx),
        "mean": (signed, lambda x: ops.mean(x, axis=1)),
        "max": (signed, lambda x: ops.max(x, axis=0)),
        "softmax": (signed, lambda x: ops.softmax(x, axis=1)),
        "log_softmax": (signed, lambda x: ops.log_softmax(x, axis=0)),
        "layer_norm": (signed, lambda x: ops.layer_norm(x, ws.tensor(np.linspace(0.5, 1.5, 4)), ws.tensor(np.linspace(-1, 1, 4)))),
        "concat": (signed, lambda x: ops.concat([x, ops.scale(x, 2.0)], axis=1)),
        "slice": (signed, lambda x: ops.slice(x, 1, 1, 3)),
        "add_bias": (signed, lambda x: ops.add_bias(x, ws.tensor(np.arange(4.0)))),
        "embedding_lookup": (table, lambda x: ops.embedding_lookup(x, [0, 3, 3, 5])),
    }

@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("op", ["matmul", "transpose", "log", "exp", "relu", "xlogx", "mean", "max", "softmax",
                                "log_softmax", "layer_norm", "concat", "slice", "add_bias", "embedding_lookup"])
def test_every_op_passes_grad_check(op, seed):
    ws = Workspace("f64")
    rng = rng_for(seed, "op-grad", op)
    data, fn = _unary_cases(ws, rng)[op]
    x = ws.tensor(data, requires_grad=True)
    direction = rng.normal(size=fn(x).shape)
    ws.clear()
    assert grad_check(lambda: ops.sum(ops.mul(fn(x), ws.tensor(direction))), [x]) < 1e-5

def test_ops_are_deterministic():
    def run():
        ws = Workspace("f64")
        x = ws.tensor(rng_for(9, "det").normal(size=(4, 4)))
        return ops.softmax(ops.matmul(x, ops.transpose(x)), axis=1).data
    assert run().tobytes() == run().tobytes()

def test_blob_layout():
    blob = encode_array(np.arange(6, dtype=np.float32).reshape(2, 3))
    magic, version, code, rank = struct.unpack_from("<4sIBB", blob)
    assert (magic, version, code, rank) == (b"QTNS", 1, 0, 2)
    assert struct.unpack_from("<2Q", blob, 10) == (2, 3)
    array, end = decode_array(blob)
    assert end == len(blob)
    assert array.dtype == np.float32
    np.testing.assert_array_equal(array, np.arange(6).reshape(2, 3))

def test_blob_errors():
    blob = encode_array(np.ones(3))
    with pytest.raises(FormatError):
        decode_array(b"XXXX" + blob[4:])
    with pytest.raises(IntegrityError):
        decode_array(blob[:-1])
    with pytest.raises(FormatError):
        encode_array(np.ones(3, dtype=np.int32))
