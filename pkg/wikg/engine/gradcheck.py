"""
Finite-difference gradient checking.

The analytic gradient from the tape is compared element-wise with central
differences ``(f(x + eps) - f(x - eps)) / 2 eps``. Checks only make sense
in 64-bit precision, so float32 inputs are rejected.
"""

from typing import Callable, Sequence

import numpy as np

from wikg.core.errors import UsageError
from wikg.engine.tensor import Tape, Tensor, no_tape
from wikg.schemas.reports import GradcheckReport

DEFAULT_EPS = 1e-6
DEFAULT_TOL = 1e-5
DEFAULT_FLOOR = 1e-3


def _scalar(value: Tensor) -> float:
    if value.data.size != 1:
        raise UsageError(f"gradcheck needs a scalar-valued function, got shape {value.shape}")
    return float(value.data.reshape(-1)[0])


def gradcheck(
    f: Callable[..., Tensor],
    inputs: Sequence[Tensor],
    eps: float = DEFAULT_EPS,
    tol: float = DEFAULT_TOL,
    floor: float = DEFAULT_FLOOR,
    name: str = "f",
) -> GradcheckReport:
    """
    Compare tape gradients of ``f(*inputs)`` with central differences.

    Relative error per element is ``|a - n| / max(|a|, |n|, floor)``.
    Inputs with ``requires_grad=False`` are held fixed.
    """
    for tensor in inputs:
        if tensor.dtype != np.float64:
            raise UsageError("gradcheck runs in 64-bit precision; build inputs under precision('float64')")

    for tensor in inputs:
        tensor.zero_grad()
    with Tape() as tape:
        value = f(*inputs)
    _scalar(value)
    tape.backward(value)

    worst = 0.0
    worst_where = ""
    checked = 0
    with no_tape():
        for position, tensor in enumerate(inputs):
            if not tensor.requires_grad:
                continue
            analytic = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
            # perturb in place through a flat view
            tensor.data = np.ascontiguousarray(tensor.data)
            flat = tensor.data.reshape(-1)
            for i in range(flat.size):
                original = flat[i]
                flat[i] = original + eps
                upper = _scalar(f(*inputs))
                flat[i] = original - eps
                lower = _scalar(f(*inputs))
                flat[i] = original
                numeric = (upper - lower) / (2 * eps)
                a = float(analytic.reshape(-1)[i])
                error = abs(a - numeric) / max(abs(a), abs(numeric), floor)
                checked += 1
                if error > worst:
                    worst = error
                    worst_where = f"{tensor.name or f'input{position}'}[{i}]"

    return GradcheckReport(
        name=name,
        max_rel_error=worst,
        worst_element=worst_where or None,
        n_checked=checked,
        tol=tol,
        passed=worst < tol,
    )
