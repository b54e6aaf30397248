"""
Adam with bias correction.

Weight decay is coupled L2 by default (added to the gradient before the
moment updates); the decoupled form shrinks parameters directly.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from wikg.core.config import TrainConfig
from wikg.core.errors import DimensionError, NonFiniteError


@dataclass
class AdamState:
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    # per-parameter work buffers reused across steps
    scratch: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, Optional[np.ndarray]],
    state: AdamState,
    config: TrainConfig,
) -> AdamState:
    """
    Update ``params`` in place and return the advanced state.

    A missing gradient counts as zero. Any non-finite gradient aborts the
    whole step before a single parameter or moment changes.
    """
    for name, g in grads.items():
        if g is None:
            continue
        if g.shape != params[name].shape:
            raise DimensionError(f"gradient of {name} has shape {g.shape}, parameter {params[name].shape}")
        if not np.all(np.isfinite(g)):
            bad = int(np.count_nonzero(~np.isfinite(g)))
            raise NonFiniteError(f"step {state.step + 1}: {bad} non-finite gradient entries in {name}")

    state.step += 1
    t = state.step
    bc1 = 1.0 - config.beta1 ** t
    bc2 = 1.0 - config.beta2 ** t
    coupled = bool(config.weight_decay) and not config.decoupled_weight_decay

    for name, p in params.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
            state.scratch[name] = np.empty_like(p)
        m, v, buf = state.m[name], state.v[name], state.scratch[name]

        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        elif g.dtype != p.dtype:
            g = g.astype(p.dtype)
        if coupled:
            g = g + config.weight_decay * p

        m *= config.beta1
        np.multiply(g, 1.0 - config.beta1, out=buf)
        m += buf
        v *= config.beta2
        np.multiply(g, g, out=buf)
        buf *= 1.0 - config.beta2
        v += buf

        if config.weight_decay and config.decoupled_weight_decay:
            p -= config.lr * config.weight_decay * p
        # p -= lr * (m / bc1) / (sqrt(v / bc2) + eps)
        np.divide(v, bc2, out=buf)
        np.sqrt(buf, out=buf)
        buf += config.eps
        np.divide(m, buf, out=buf)
        buf *= config.lr / bc1
        p -= buf

    return state
