"""Parameter initialization and the affine map shared by every classifier."""

import math
from typing import Optional

import numpy as np

from wikg.engine import ops
from wikg.engine.tensor import Tensor


def xavier_uniform(fan_in: int, fan_out: int, rng: np.random.Generator, name: Optional[str] = None) -> Tensor:
    """Weights uniform in +-sqrt(6 / (fan_in + fan_out)), stored fan_in x fan_out."""
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)), requires_grad=True, name=name)


def zeros(*shape: int, name: Optional[str] = None) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True, name=name)


def affine(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """``x W + b`` with the bias broadcast over rows."""
    out = ops.matmul(x, weight)
    return ops.add(out, bias) if bias is not None else out
