"""Dense tensors with reverse-mode differentiation."""
from wikg.engine.tensor import Tape, Tensor, active_tape, default_dtype, no_tape, precision
from wikg.engine.rng import derive_rng, make_rng

__all__ = [
    "Tape",
    "Tensor",
    "active_tape",
    "default_dtype",
    "no_tape",
    "precision",
    "derive_rng",
    "make_rng",
]
