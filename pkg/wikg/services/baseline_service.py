"""
Multiple-instance baselines: mean pooling, max pooling and gated attention.

They share the input projection and classifier head with WiKG but pool
instances independently, so labels that depend on which instances occur
together are out of their reach.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from wikg.core.config import ModelConfig
from wikg.core.enums import ClassifierInit, Mode, ModelKind
from wikg.core.errors import DimensionError, InputError, ParameterError
from wikg.engine import ops
from wikg.engine.tensor import Tensor
from wikg.services.layers import affine, xavier_uniform, zeros


@dataclass
class GatedAttention:
    """``a = softmax_i(w . (tanh(V x_i) * sigmoid(U x_i)))``"""

    v_w: Tensor  # D x H
    v_b: Tensor
    u_w: Tensor  # D x H
    u_b: Tensor
    w: Tensor    # H x 1, no bias (softmax ignores a shared shift)


@dataclass
class BaselineParams:
    input_w: Tensor
    input_b: Tensor
    classifier_w: Tensor
    classifier_b: Tensor
    attention: Optional[GatedAttention] = None

    def named_tensors(self) -> Dict[str, Tensor]:
        named = {
            "input_proj.weight": self.input_w,
            "input_proj.bias": self.input_b,
            "classifier.weight": self.classifier_w,
            "classifier.bias": self.classifier_b,
        }
        if self.attention is not None:
            named.update({
                "attention_v.weight": self.attention.v_w,
                "attention_v.bias": self.attention.v_b,
                "attention_u.weight": self.attention.u_w,
                "attention_u.bias": self.attention.u_b,
                "attention_w.weight": self.attention.w,
            })
        return named


def _check_kind(kind: ModelKind) -> None:
    if not kind.is_baseline:
        raise ParameterError(f"{kind.value} is not a baseline")


def init_baseline_params(config: ModelConfig, rng: np.random.Generator) -> BaselineParams:
    _check_kind(config.kind)
    d_in, d, c, hidden = config.d_in, config.d_model, config.n_classes, config.gated_hidden
    input_w = xavier_uniform(d_in, d, rng, name="input_proj.weight")
    attention = None
    if config.kind is ModelKind.ABMIL:
        attention = GatedAttention(
            v_w=xavier_uniform(d, hidden, rng, name="attention_v.weight"),
            v_b=zeros(hidden, name="attention_v.bias"),
            u_w=xavier_uniform(d, hidden, rng, name="attention_u.weight"),
            u_b=zeros(hidden, name="attention_u.bias"),
            w=xavier_uniform(hidden, 1, rng, name="attention_w.weight"),
        )
    if config.classifier_init is ClassifierInit.ZERO:
        classifier_w = zeros(d, c, name="classifier.weight")
    else:
        classifier_w = xavier_uniform(d, c, rng, name="classifier.weight")
    return BaselineParams(
        input_w=input_w,
        input_b=zeros(d, name="input_proj.bias"),
        classifier_w=classifier_w,
        classifier_b=zeros(c, name="classifier.bias"),
        attention=attention,
    )


def baseline_params_from_tensors(tensors: Dict[str, Tensor]) -> BaselineParams:
    attention = None
    if "attention_w.weight" in tensors:
        attention = GatedAttention(
            v_w=tensors["attention_v.weight"],
            v_b=tensors["attention_v.bias"],
            u_w=tensors["attention_u.weight"],
            u_b=tensors["attention_u.bias"],
            w=tensors["attention_w.weight"],
        )
    return BaselineParams(
        input_w=tensors["input_proj.weight"],
        input_b=tensors["input_proj.bias"],
        classifier_w=tensors["classifier.weight"],
        classifier_b=tensors["classifier.bias"],
        attention=attention,
    )


def gated_attention_weights(x: Tensor, attention: GatedAttention) -> Tensor:
    """1 x n attention weights over instances."""
    gate = ops.hadamard(
        ops.tanh_op(affine(x, attention.v_w, attention.v_b)),
        ops.sigmoid(affine(x, attention.u_w, attention.u_b)),
    )
    scores = ops.matmul(gate, attention.w)  # n x 1
    return ops.row_softmax(ops.transpose(scores))


def baseline_features(
    features: Tensor, params: BaselineParams, kind: ModelKind
) -> Tuple[Tensor, Optional[Tensor]]:
    """Logits and, for gated attention, the instance weights."""
    _check_kind(kind)
    if features.ndim != 2 or features.shape[0] == 0:
        raise InputError(f"a bag needs at least one instance, got features of shape {features.shape}")
    if features.shape[1] != params.input_w.shape[0]:
        raise DimensionError(
            f"bag features {features.shape} do not match input dimension {params.input_w.shape[0]}"
        )
    x = affine(features, params.input_w, params.input_b)
    weights = None
    if kind is ModelKind.MEAN:
        pooled = ops.expand_dims(ops.reduce_mean_rows(x), 0)
    elif kind is ModelKind.MAX:
        pooled = ops.expand_dims(ops.reduce_max_rows(x), 0)
    else:
        if params.attention is None:
            raise ParameterError("gated attention parameters are missing")
        weights = gated_attention_weights(x, params.attention)
        pooled = ops.matmul(weights, x)
    return affine(pooled, params.classifier_w, params.classifier_b), weights


def baseline_forward(bag, params: BaselineParams, kind: ModelKind, mode: Mode = Mode.EVAL) -> Tensor:
    """Logits for one bag. ``mode`` is accepted for symmetry; no baseline uses dropout."""
    logits, _ = baseline_features(Tensor(bag.features), params, kind)
    return logits


class BaselineModel:
    """A pooling baseline: configuration plus parameters."""

    def __init__(self, config: ModelConfig, params: BaselineParams):
        _check_kind(config.kind)
        self.config = config
        self.params = params

    @classmethod
    def initialize(cls, config: ModelConfig, rng: np.random.Generator) -> "BaselineModel":
        return cls(config, init_baseline_params(config, rng))

    def named_tensors(self) -> Dict[str, Tensor]:
        return self.params.named_tensors()

    def forward(self, bag, mode: Mode = Mode.EVAL, rng=None) -> Tensor:
        return baseline_forward(bag, self.params, self.config.kind, mode)
