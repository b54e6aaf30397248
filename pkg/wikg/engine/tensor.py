"""
Dense tensors and the reverse-mode tape.

A ``Tensor`` wraps a numpy array of at most three dimensions. Operations
in ``wikg.engine.ops`` record themselves on the active ``Tape`` when one of
their inputs requires a gradient; ``Tape.backward`` walks the recorded
nodes in reverse and accumulates gradients into the leaves.

The active tape and the default precision live in context variables, so
independent tapes can run in different threads without sharing state.
"""

from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from wikg.core.config import settings
from wikg.core.enums import Precision
from wikg.core.errors import DimensionError, UsageError

MAX_NDIM = 3

_default_dtype: ContextVar[np.dtype] = ContextVar(
    "wikg_default_dtype", default=np.dtype(settings.precision.value)
)
_active_tape: ContextVar[Optional["Tape"]] = ContextVar("wikg_active_tape", default=None)

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def default_dtype() -> np.dtype:
    return _default_dtype.get()


@contextmanager
def precision(value: Union[Precision, str, np.dtype]) -> Iterator[np.dtype]:
    """Set the storage dtype for tensors created inside the block."""
    if isinstance(value, Precision):
        value = value.value
    dtype = np.dtype(value)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise UsageError(f"unsupported precision: {dtype}")
    token = _default_dtype.set(dtype)
    try:
        yield dtype
    finally:
        _default_dtype.reset(token)


class Tensor:
    """Row-major real array with optional gradient."""

    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        name: Optional[str] = None,
        dtype=None,
    ):
        array = np.array(data, dtype=dtype or default_dtype())
        if array.ndim > MAX_NDIM:
            raise DimensionError(f"tensors have at most {MAX_NDIM} dimensions, got {array.ndim}")
        self.data = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name

    @classmethod
    def wrap(cls, array: np.ndarray, requires_grad: bool = False) -> "Tensor":
        """Adopt an existing array without copying or casting."""
        tensor = cls.__new__(cls)
        tensor.data = array
        tensor.requires_grad = requires_grad
        tensor.grad = None
        tensor.name = None
        return tensor

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise UsageError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label}, requires_grad={self.requires_grad})"

    # Operator sugar; the functional forms live in wikg.engine.ops
    def __add__(self, other: "Tensor") -> "Tensor":
        from wikg.engine import ops
        return ops.add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        from wikg.engine import ops
        return ops.subtract(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        from wikg.engine import ops
        return ops.hadamard(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from wikg.engine import ops
        return ops.matmul(self, other)


@dataclass
class TapeNode:
    """One recorded operation."""

    op: str
    output: Tensor
    inputs: Tuple[Tensor, ...]
    backward: BackwardFn


class Tape:
    """
    Ordered record of differentiable operations.

    Nodes are appended as operations run, so operands always precede the
    nodes that consume them.
    """

    def __init__(self):
        self.nodes: List[TapeNode] = []
        self._tokens: list = []

    def __enter__(self) -> "Tape":
        self._tokens.append(_active_tape.set(self))
        return self

    def __exit__(self, *exc) -> None:
        _active_tape.reset(self._tokens.pop())

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, op: str, output: Tensor, inputs: Tuple[Tensor, ...], backward: BackwardFn) -> None:
        self.nodes.append(TapeNode(op, output, inputs, backward))

    def backward(self, loss: Tensor, grad: Optional[np.ndarray] = None) -> None:
        """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every leaf that requires it."""
        if grad is None:
            if loss.data.size != 1:
                raise UsageError(f"backward from a non-scalar of shape {loss.shape} needs an explicit grad")
            grad = np.ones_like(loss.data)
        pending: Dict[int, np.ndarray] = {id(loss): np.asarray(grad, dtype=loss.dtype)}
        owners: Dict[int, Tensor] = {id(loss): loss}

        for node in reversed(self.nodes):
            upstream = pending.pop(id(node.output), None)
            if upstream is None:
                continue
            for tensor, contribution in zip(node.inputs, node.backward(upstream)):
                if contribution is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                if key in pending:
                    pending[key] = pending[key] + contribution
                else:
                    pending[key] = contribution
                    owners[key] = tensor

        # What is left was never produced by a node: leaves
        for key, contribution in pending.items():
            tensor = owners[key]
            contribution = np.asarray(contribution, dtype=tensor.dtype).reshape(tensor.shape)
            tensor.grad = contribution.copy() if tensor.grad is None else tensor.grad + contribution


def active_tape() -> Optional[Tape]:
    return _active_tape.get()


@contextmanager
def no_tape() -> Iterator[None]:
    """Run operations without recording, even inside an outer tape."""
    token = _active_tape.set(None)
    try:
        yield
    finally:
        _active_tape.reset(token)
