"""
Tests for the tensor engine: forward values, backward rules, the tape and
finite-difference gradient checking.
"""

import math

import numpy as np
import pytest

from wikg.core.errors import DimensionError, NonFiniteError, ParameterError, UsageError
from wikg.engine import ops
from wikg.engine.gradcheck import gradcheck
from wikg.engine.rng import derive_rng, make_rng
from wikg.engine.tensor import Tape, Tensor, default_dtype, no_tape, precision
from wikg.services.gradcheck_suite import CHECKS, MODEL_CHECKS, run_gradcheck_suite


def t64(data, grad=False):
    return Tensor(data, requires_grad=grad, dtype=np.float64)


def test_matmul_examples():
    eye = t64([[1, 0], [0, 1]])
    assert np.array_equal(ops.matmul(t64([[1, 2], [3, 4]]), eye).data, [[1, 2], [3, 4]])
    assert ops.matmul(t64([[1, 2]]), t64([[3], [4]])).data.tolist() == [[11]]


def test_matmul_shape_mismatch():
    with pytest.raises(DimensionError):
        ops.matmul(t64(np.ones((2, 3))), t64(np.ones((2, 3))))


def test_softmax_examples():
    assert np.allclose(ops.row_softmax(t64([[0, 0, 0]])).data, [[1 / 3, 1 / 3, 1 / 3]])
    assert np.allclose(ops.row_softmax(t64([[1000, 0, 0]])).data, [[1, 0, 0]], atol=1e-9)

    e = [math.exp(v) for v in (1, 2, 3)]
    expected = [v / sum(e) for v in e]
    assert np.allclose(ops.row_softmax(t64([[1, 2, 3]])).data[0], expected, atol=1e-15)


def test_softmax_rows_are_distributions():
    rng = make_rng(0)
    y = ops.row_softmax(t64(rng.standard_normal((50, 7)) * 5)).data
    assert np.all(np.abs(y.sum(axis=1) - 1) < 1e-6)
    assert np.all(y > 0) and np.all(y <= 1)


def test_activations():
    assert ops.tanh_op(t64([0.0])).data[0] == 0.0
    assert ops.leaky_relu(t64([-2.0]), 0.2).data[0] == pytest.approx(-0.4)
    assert ops.leaky_relu(t64([3.0]), 0.2).data[0] == 3.0
    with pytest.raises(ParameterError):
        ops.leaky_relu(t64([1.0]), 1.0)


def test_topk_examples():
    values, index = ops.topk_rows(t64([[5, 1, 9, 3]]), 2)
    assert values.data.tolist() == [[9, 5]]
    assert index.tolist() == [[2, 0]]

    _, index = ops.topk_rows(t64([[7, 7, 7]]), 2)
    assert index.tolist() == [[0, 1]]

    for k in (0, 5):
        with pytest.raises(ParameterError):
            ops.topk_rows(t64([[5, 1, 9, 3]]), k)


def test_topk_matches_full_sort():
    rng = make_rng(11)
    for _ in range(1000):
        n = int(rng.integers(1, 13))
        # small integers force plenty of ties
        row = rng.integers(0, 4, size=n).astype(np.float64)
        order = sorted(range(n), key=lambda j: (-row[j], j))
        for k in range(1, n + 1):
            _, index = ops.topk_rows(t64([row]), k)
            assert index[0].tolist() == order[:k]


def test_topk_gradient_scatters_to_selected():
    x = t64([[5, 1, 9, 3]], grad=True)
    with Tape() as tape:
        values, _ = ops.topk_rows(x, 2)
        loss = ops.sum_all(values)
    tape.backward(loss)
    assert x.grad.tolist() == [[1, 0, 1, 0]]


def test_reductions():
    x = t64([[2, 4], [4, 8]])
    assert ops.reduce_mean_rows(x).data.tolist() == [3, 6]
    assert ops.reduce_max_rows(t64([[1, -2, 3]])).data.tolist() == [1, -2, 3]
    with pytest.raises(DimensionError):
        ops.reduce_mean_rows(t64(np.zeros((0, 3))))


def test_max_gradient_goes_to_first_row_on_ties():
    x = t64([[1, 5], [1, 2]], grad=True)
    with Tape() as tape:
        loss = ops.sum_all(ops.reduce_max_rows(x))
    tape.backward(loss)
    assert x.grad.tolist() == [[1, 1], [0, 0]]


def test_cross_entropy_examples():
    assert ops.cross_entropy(t64([[0, 0]]), 0).item() == pytest.approx(math.log(2))
    assert abs(ops.cross_entropy(t64([[50, -50]]), 0).item()) < 1e-12
    with pytest.raises(ParameterError):
        ops.cross_entropy(t64([[0, 0]]), 2)


def test_cross_entropy_gradient_is_softmax_minus_onehot():
    logits = t64([[0.5, -1.0, 2.0]], grad=True)
    with Tape() as tape:
        loss = ops.cross_entropy(logits, 1)
    tape.backward(loss)
    p = np.exp([0.5, -1.0, 2.0])
    p /= p.sum()
    assert np.allclose(logits.grad[0], p - np.array([0, 1, 0]), atol=1e-15)


def test_gradcheck_quadratic():
    with precision("float64"):
        x = Tensor([1.0, 2.0, 3.0], requires_grad=True, name="x")
    report = gradcheck(lambda v: ops.sum_all(ops.hadamard(v, v)), [x], name="square")
    assert report.passed
    assert np.allclose(x.grad, [2, 4, 6])


def test_gradcheck_detects_wrong_backward():
    def broken_square(x):
        def backward(g):
            return (g * 3 * x.data,)
        return ops._emit("broken_square", x.data ** 2, (x,), backward)

    x = t64([1.0, 2.0, 3.0], grad=True)
    report = gradcheck(lambda v: ops.sum_all(broken_square(v)), [x], name="broken")
    assert not report.passed
    assert report.max_rel_error > 0.1


def test_gradcheck_rejects_misuse():
    with pytest.raises(UsageError):
        gradcheck(lambda v: ops.sum_all(v), [Tensor([1.0], requires_grad=True, dtype=np.float32)])
    with pytest.raises(UsageError):
        gradcheck(lambda v: ops.scale(v, 2.0), [t64([1.0, 2.0], grad=True)])


def test_shared_operand_accumulates():
    x = t64([1.0, -2.0, 0.5], grad=True)
    with Tape() as tape:
        loss = ops.sum_all(ops.add(ops.hadamard(x, x), ops.scale(x, 3.0)))
    tape.backward(loss)
    assert np.allclose(x.grad, 2 * x.data + 3)


def test_no_tape_records_nothing():
    x = t64([1.0], grad=True)
    with Tape() as tape:
        with no_tape():
            ops.tanh_op(x)
        assert len(tape) == 0
        ops.tanh_op(x)
        assert len(tape) == 1


def test_dropout_identity_cases():
    x = t64(np.arange(6.0).reshape(2, 3))
    assert ops.dropout(x, 0.3, False) is x
    assert ops.dropout(x, 0.0, True, make_rng(0)) is x
    with pytest.raises(ParameterError):
        ops.dropout(x, 0.3, True)


def test_dropout_is_inverted():
    x = t64(np.ones((200, 10)))
    y = ops.dropout(x, 0.5, True, make_rng(4)).data
    assert set(np.unique(y).tolist()) <= {0.0, 2.0}
    assert 0.4 < np.mean(y == 0) < 0.6


def test_non_finite_forward_is_an_error():
    with pytest.raises(NonFiniteError):
        ops.tanh_op(t64([np.nan]))


def test_tensor_contracts():
    with pytest.raises(DimensionError):
        Tensor(np.zeros((1, 1, 1, 1)))
    with pytest.raises(UsageError):
        t64([1.0, 2.0]).item()
    tape = Tape()
    with pytest.raises(UsageError):
        tape.backward(t64([1.0, 2.0]))


def test_precision_context():
    assert default_dtype() == np.float32
    with precision("float64"):
        assert Tensor([1.0]).dtype == np.float64
    assert Tensor([1.0]).dtype == np.float32
    with pytest.raises(UsageError):
        with precision("float16"):
            pass


def test_derived_streams_are_reproducible_and_independent():
    a = derive_rng(1, "shuffle", 2).random(4)
    assert np.array_equal(a, derive_rng(1, "shuffle", 2).random(4))
    assert not np.array_equal(a, derive_rng(1, "dropout", 2).random(4))


def test_every_op_passes_gradcheck_over_many_seeds():
    op_names = [name for name in CHECKS if name not in MODEL_CHECKS]
    reports = run_gradcheck_suite(op_names, seeds=50)
    failed = [(r.name, r.seed, r.max_rel_error) for r in reports if not r.passed]
    assert not failed


def test_models_pass_gradcheck():
    reports = run_gradcheck_suite(list(MODEL_CHECKS), seeds=3)
    assert {r.name for r in reports} >= {"wikg_knn_cos", "wikg_knn_dist", "wikg_features"}
    assert all(r.passed for r in reports), [(r.name, r.seed, r.max_rel_error) for r in reports if not r.passed]


def test_full_model_passes_gradcheck_over_fifty_seeds():
    reports = run_gradcheck_suite(["wikg", "wikg_features"], seeds=50)
    failed = [(r.name, r.seed, r.max_rel_error) for r in reports if not r.passed]
    assert len(reports) == 100
    assert not failed


def test_norm_ops():
    x = t64([[3.0, 4.0], [0.0, 0.0]], grad=True)
    with Tape() as tape:
        norms = ops.l2_norm(x)
        loss = ops.sum_all(norms)
    tape.backward(loss)
    assert norms.data.tolist() == [5.0, 0.0]
    assert np.allclose(x.grad, [[0.6, 0.8], [0.0, 0.0]])

    unit = ops.l2_normalize(t64([[3.0, 4.0], [0.0, 2.0]]))
    assert np.allclose(unit.data, [[0.6, 0.8], [0.0, 1.0]])
    with pytest.raises(ParameterError):
        ops.l2_normalize(t64([[0.0, 0.0]]))


def test_tight_tolerance_reports_failures_by_name():
    reports = run_gradcheck_suite(["softmax", "matmul"], tol=1e-14)
    assert {r.name for r in reports} == {"softmax", "matmul"}
    assert not all(r.passed for r in reports)


def test_unknown_gradcheck_op():
    with pytest.raises(ParameterError):
        run_gradcheck_suite(["conv2d"])
