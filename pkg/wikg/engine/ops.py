"""
Differentiable operations.

Each function computes its forward value with numpy, checks it is finite,
and, when a tape is active and an input requires a gradient, records a
backward rule returning one gradient per input (``None`` for inputs that
take none).
"""

from typing import Optional, Sequence, Tuple

import numpy as np

from wikg.core.errors import DimensionError, NonFiniteError, ParameterError
from wikg.engine.tensor import BackwardFn, Tensor, active_tape


def _emit(op: str, data: np.ndarray, inputs: Tuple[Tensor, ...], backward: BackwardFn) -> Tensor:
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"{op} produced non-finite values")
    tape = active_tape()
    requires_grad = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor.wrap(data, requires_grad=requires_grad)
    if requires_grad:
        tape.record(op, out, inputs, backward)
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` back down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# Elementwise arithmetic

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("add", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _emit("add", a.data + b.data, (a, b), backward)


def subtract(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("subtract", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)

    return _emit("subtract", a.data - b.data, (a, b), backward)


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product."""
    _check_broadcast("hadamard", a, b)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _emit("hadamard", a.data * b.data, (a, b), backward)


def scale(x: Tensor, c: float) -> Tensor:
    """Multiply by a constant scalar."""
    factor = x.dtype.type(c)

    def backward(g):
        return (g * factor,)

    return _emit("scale", x.data * factor, (x,), backward)


def one_minus(x: Tensor) -> Tensor:
    def backward(g):
        return (-g,)

    return _emit("one_minus", 1 - x.data, (x,), backward)


# Linear algebra and shape

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return _emit("matmul", a.data @ b.data, (a, b), backward)


def transpose(x: Tensor) -> Tensor:
    if x.ndim != 2:
        raise DimensionError(f"transpose needs a 2-D tensor, got {x.shape}")

    def backward(g):
        return (g.T,)

    return _emit("transpose", np.ascontiguousarray(x.data.T), (x,), backward)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    original = x.shape
    try:
        data = x.data.reshape(tuple(shape))
    except ValueError:
        raise DimensionError(f"cannot reshape {original} to {tuple(shape)}") from None

    def backward(g):
        return (g.reshape(original),)

    return _emit("reshape", data, (x,), backward)


def expand_dims(x: Tensor, axis: int) -> Tensor:
    original = x.shape

    def backward(g):
        return (g.reshape(original),)

    return _emit("expand_dims", np.expand_dims(x.data, axis), (x,), backward)


def gather_rows(x: Tensor, index: np.ndarray) -> Tensor:
    """``out[...] = x[index[...]]``; ``index`` is an integer array of any shape."""
    if x.ndim != 2:
        raise DimensionError(f"gather_rows needs a 2-D source, got {x.shape}")
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= x.shape[0]):
        raise ParameterError(f"gather_rows index out of range [0, {x.shape[0]})")

    def backward(g):
        grad = np.zeros_like(x.data)
        np.add.at(grad, index.reshape(-1), g.reshape(-1, x.shape[1]))
        return (grad,)

    return _emit("gather_rows", x.data[index], (x,), backward)


def concat_rows(tensors: Sequence[Tensor]) -> Tensor:
    if not tensors:
        raise DimensionError("concat_rows needs at least one tensor")
    tails = {t.shape[1:] for t in tensors}
    if len(tails) != 1:
        raise DimensionError(f"concat_rows: trailing shapes differ: {sorted(tails)}")
    splits = np.cumsum([t.shape[0] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=0))

    return _emit("concat_rows", np.concatenate([t.data for t in tensors], axis=0), tuple(tensors), backward)


# Nonlinearities

def tanh_op(x: Tensor) -> Tensor:
    y = np.tanh(x.data)

    def backward(g):
        return (g * (1 - y * y),)

    return _emit("tanh", y, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    # Split by sign so exp never overflows
    z = np.exp(-np.abs(x.data))
    y = np.where(x.data >= 0, 1 / (1 + z), z / (1 + z))

    def backward(g):
        return (g * y * (1 - y),)

    return _emit("sigmoid", y, (x,), backward)


def leaky_relu(x: Tensor, slope: float) -> Tensor:
    if not 0.0 < slope < 1.0:
        raise ParameterError(f"leaky_relu slope must lie in (0, 1), got {slope}")
    positive = x.data > 0
    factor = np.where(positive, 1, slope).astype(x.dtype)

    def backward(g):
        return (g * factor,)

    return _emit("leaky_relu", x.data * factor, (x,), backward)


def l2_norm(x: Tensor) -> Tensor:
    """Euclidean norm along the last axis; the gradient at a zero vector is zero."""
    y = np.sqrt((x.data * x.data).sum(axis=-1))
    safe = np.where(y > 0, y, 1)

    def backward(g):
        return (np.expand_dims(np.where(y > 0, g / safe, 0), -1) * x.data,)

    return _emit("l2_norm", y, (x,), backward)


def l2_normalize(x: Tensor) -> Tensor:
    """Rows scaled to unit length along the last axis."""
    norms = np.sqrt((x.data * x.data).sum(axis=-1, keepdims=True))
    if np.any(norms == 0):
        raise ParameterError("l2_normalize is undefined for zero vectors")
    y = x.data / norms

    def backward(g):
        return ((g - y * (g * y).sum(axis=-1, keepdims=True)) / norms,)

    return _emit("l2_normalize", y, (x,), backward)


def row_softmax(x: Tensor) -> Tensor:
    """Softmax along the last axis (each row sums to one)."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return _emit("row_softmax", y, (x,), backward)


def dropout(x: Tensor, p: float, train: bool, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Inverted dropout; the identity in eval mode or when ``p == 0``."""
    if not 0.0 <= p < 1.0:
        raise ParameterError(f"dropout probability must lie in [0, 1), got {p}")
    if not train or p == 0.0:
        return x
    if rng is None:
        raise ParameterError("dropout in train mode needs an explicit generator")
    mask = (rng.random(x.shape) >= p).astype(x.dtype) / x.dtype.type(1.0 - p)

    def backward(g):
        return (g * mask,)

    return _emit("dropout", x.data * mask, (x,), backward)


# Selection

def topk_rows(x: Tensor, k: int) -> Tuple[Tensor, np.ndarray]:
    """
    The ``k`` largest entries of each row in descending order.

    Ties go to the lower column index. Indices are returned as a plain
    integer array and carry no gradient.
    """
    if x.ndim != 2:
        raise DimensionError(f"topk_rows needs a 2-D tensor, got {x.shape}")
    n_cols = x.shape[1]
    if not 1 <= k <= n_cols:
        raise ParameterError(f"k must lie in [1, {n_cols}], got {k}")
    # stable sort of the negation keeps equal values in column order
    index = np.argsort(-x.data, axis=1, kind="stable")[:, :k]
    values = np.take_along_axis(x.data, index, axis=1)

    def backward(g):
        grad = np.zeros_like(x.data)
        np.put_along_axis(grad, index, g, axis=1)
        return (grad,)

    return _emit("topk_rows", values, (x,), backward), index


# Reductions

def reduce_mean_rows(x: Tensor) -> Tensor:
    if x.ndim != 2 or x.shape[0] == 0:
        raise DimensionError(f"reduce_mean_rows needs a non-empty 2-D tensor, got {x.shape}")
    m = x.shape[0]

    def backward(g):
        return (np.broadcast_to(g / m, x.shape).copy(),)

    return _emit("reduce_mean_rows", x.data.mean(axis=0), (x,), backward)


def reduce_max_rows(x: Tensor) -> Tensor:
    """Column-wise max; the gradient goes to the first row holding the max."""
    if x.ndim != 2 or x.shape[0] == 0:
        raise DimensionError(f"reduce_max_rows needs a non-empty 2-D tensor, got {x.shape}")
    rows = np.argmax(x.data, axis=0)
    cols = np.arange(x.shape[1])

    def backward(g):
        grad = np.zeros_like(x.data)
        grad[rows, cols] = g
        return (grad,)

    return _emit("reduce_max_rows", x.data[rows, cols], (x,), backward)


def reduce_sum(x: Tensor, axis: int) -> Tensor:
    shape = x.shape

    def backward(g):
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _emit("reduce_sum", x.data.sum(axis=axis), (x,), backward)


def sum_all(x: Tensor) -> Tensor:
    def backward(g):
        return (np.full_like(x.data, g),)

    return _emit("sum_all", np.asarray(x.data.sum()), (x,), backward)


# Loss

def cross_entropy(logits: Tensor, label: int) -> Tensor:
    """``-log softmax(logits)[label]`` for a single ``1 x C`` row."""
    if logits.data.size != logits.shape[-1] or logits.ndim > 2:
        raise DimensionError(f"cross_entropy expects a 1 x C row, got {logits.shape}")
    row = logits.data.reshape(-1)
    n_classes = row.shape[0]
    if not 0 <= label < n_classes:
        raise ParameterError(f"label {label} out of range [0, {n_classes})")
    top = row.max()
    log_norm = top + np.log(np.exp(row - top).sum())
    probs = np.exp(row - log_norm)
    onehot = np.zeros_like(row)
    onehot[label] = 1

    def backward(g):
        return ((g * (probs - onehot)).reshape(logits.shape),)

    return _emit("cross_entropy", np.asarray(log_norm - row[label]), (logits,), backward)


def softmax_probabilities(logits: Tensor) -> np.ndarray:
    """Predicted class probabilities (no tape)."""
    row = logits.data.reshape(-1).astype(np.float64)
    e = np.exp(row - row.max())
    return e / e.sum()
