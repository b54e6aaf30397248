"""
Knowledge-aware attention over the bag graph, the dual-interaction node
update, readout and classifier head.

Pipeline for one bag:
input projection -> graph construction -> attention over neighbors ->
dual interaction -> dropout (train only) -> readout -> classifier logits.
"""

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from wikg.core.config import ModelConfig
from wikg.core.enums import ClassifierInit, Mode, Readout
from wikg.core.errors import DimensionError, ParameterError
from wikg.core.logging import log_run_event
from wikg.engine import ops
from wikg.engine.tensor import Tensor
from wikg.services.graph_service import DirectedBagGraph, HeadTailProjector, build_graph
from wikg.services.layers import affine, xavier_uniform, zeros


@dataclass
class WikgParams:
    """All learnable tensors of the WiKG classifier."""

    input_w: Tensor       # D_in x D
    input_b: Tensor       # D
    projector: HeadTailProjector
    w1: Tensor            # D x D
    b1: Tensor
    w2: Tensor            # D x D
    b2: Tensor
    classifier_w: Tensor  # D x C
    classifier_b: Tensor  # C
    leaky_slope: float = 0.2

    def named_tensors(self) -> Dict[str, Tensor]:
        return {
            "input_proj.weight": self.input_w,
            "input_proj.bias": self.input_b,
            "head.weight": self.projector.w_head,
            "tail.weight": self.projector.w_tail,
            "w1.weight": self.w1,
            "w1.bias": self.b1,
            "w2.weight": self.w2,
            "w2.bias": self.b2,
            "classifier.weight": self.classifier_w,
            "classifier.bias": self.classifier_b,
        }


@dataclass
class AttentionTrace:
    u: Tensor      # n x k triplet scores
    pi: Tensor     # n x k attention weights
    h_nbr: Tensor  # n x D neighbor aggregate
    h_new: Tensor  # n x D updated heads


@dataclass
class ForwardResult:
    logits: Tensor
    trace: AttentionTrace
    graph: DirectedBagGraph


def init_wikg_params(config: ModelConfig, rng: np.random.Generator) -> WikgParams:
    d_in, d, c = config.d_in, config.d_model, config.n_classes
    if config.classifier_init is ClassifierInit.ZERO:
        classifier_w = zeros(d, c, name="classifier.weight")
    else:
        classifier_w = xavier_uniform(d, c, rng, name="classifier.weight")
    return WikgParams(
        input_w=xavier_uniform(d_in, d, rng, name="input_proj.weight"),
        input_b=zeros(d, name="input_proj.bias"),
        projector=HeadTailProjector(
            w_head=xavier_uniform(d, d, rng, name="head.weight"),
            w_tail=xavier_uniform(d, d, rng, name="tail.weight"),
        ),
        w1=xavier_uniform(d, d, rng, name="w1.weight"),
        b1=zeros(d, name="w1.bias"),
        w2=xavier_uniform(d, d, rng, name="w2.weight"),
        b2=zeros(d, name="w2.bias"),
        classifier_w=classifier_w,
        classifier_b=zeros(c, name="classifier.bias"),
        leaky_slope=config.leaky_slope,
    )


def wikg_params_from_tensors(tensors: Dict[str, Tensor], leaky_slope: float) -> WikgParams:
    return WikgParams(
        input_w=tensors["input_proj.weight"],
        input_b=tensors["input_proj.bias"],
        projector=HeadTailProjector(tensors["head.weight"], tensors["tail.weight"]),
        w1=tensors["w1.weight"],
        b1=tensors["w1.bias"],
        w2=tensors["w2.weight"],
        b2=tensors["w2.bias"],
        classifier_w=tensors["classifier.weight"],
        classifier_b=tensors["classifier.bias"],
        leaky_slope=leaky_slope,
    )


def knowledge_attention(graph: DirectedBagGraph) -> AttentionTrace:
    """
    ``u_ij = t_j . tanh(h_i + r_ij)``, ``pi = softmax_j(u)``,
    ``h_nbr_i = sum_j pi_ij t_j``. ``h_new`` is left equal to the heads;
    ``dual_interaction`` fills it in.
    """
    heads, nbr_tails, edge_emb = graph.heads, graph.neighbor_tails, graph.edge_emb
    if edge_emb.shape != nbr_tails.shape or edge_emb.shape[0] != heads.shape[0]:
        raise DimensionError(f"edge embeddings {edge_emb.shape} do not match neighbor tails {nbr_tails.shape}")
    gate = ops.tanh_op(ops.add(ops.expand_dims(heads, 1), edge_emb))
    u = ops.reduce_sum(ops.hadamard(nbr_tails, gate), axis=-1)
    pi = ops.row_softmax(u)
    h_nbr = ops.reduce_sum(ops.hadamard(ops.expand_dims(pi, -1), nbr_tails), axis=1)
    return AttentionTrace(u=u, pi=pi, h_nbr=h_nbr, h_new=heads)


def dual_interaction(h: Tensor, h_nbr: Tensor, params: WikgParams) -> Tensor:
    """``LeakyReLU(W1 (h + h_nbr)) + LeakyReLU(W2 (h * h_nbr))``"""
    if h.shape != h_nbr.shape:
        raise DimensionError(f"h {h.shape} and h_nbr {h_nbr.shape} must match")
    slope = params.leaky_slope
    additive = ops.leaky_relu(affine(ops.add(h, h_nbr), params.w1, params.b1), slope)
    multiplicative = ops.leaky_relu(affine(ops.hadamard(h, h_nbr), params.w2, params.b2), slope)
    return ops.add(additive, multiplicative)


def readout(x: Tensor, kind: Readout) -> Tensor:
    """Global pooling to a 1 x D graph embedding."""
    pooled = ops.reduce_mean_rows(x) if kind is Readout.MEAN else ops.reduce_max_rows(x)
    return ops.expand_dims(pooled, 0)


def resolve_k(n: int, config: ModelConfig) -> int:
    """The k used for a bag of ``n`` instances; clamps only when configured to."""
    limit = n - 1 if config.exclude_self else n
    if config.k <= limit:
        return config.k
    if config.clamp_k and limit >= 1:
        log_run_event(
            event_type="k_clamped",
            description=f"k={config.k} clamped to {limit} for a bag of {n} instances",
            severity="INFO",
        )
        return limit
    raise ParameterError(f"bag has {n} instances, fewer than k={config.k} (enable clamp_k to clamp)")


def forward_features(
    features: Tensor,
    params: WikgParams,
    config: ModelConfig,
    mode: Mode = Mode.EVAL,
    rng: Optional[np.random.Generator] = None,
) -> ForwardResult:
    if features.ndim != 2 or features.shape[1] != params.input_w.shape[0]:
        raise DimensionError(
            f"bag features {features.shape} do not match input dimension {params.input_w.shape[0]}"
        )
    k = resolve_k(features.shape[0], config)
    embedded = affine(features, params.input_w, params.input_b)
    graph = build_graph(embedded, params.projector, config.policy, k, config.exclude_self)
    trace = knowledge_attention(graph)
    h_new = dual_interaction(graph.heads, trace.h_nbr, params)
    trace.h_new = h_new
    dropped = ops.dropout(h_new, config.dropout_p, mode is Mode.TRAIN, rng)
    logits = affine(readout(dropped, config.readout), params.classifier_w, params.classifier_b)
    return ForwardResult(logits=logits, trace=trace, graph=graph)


def forward_bag(
    bag,
    params: WikgParams,
    config: ModelConfig,
    mode: Mode = Mode.EVAL,
    rng: Optional[np.random.Generator] = None,
) -> ForwardResult:
    """Logits, attention trace and graph for one ``Bag``."""
    return forward_features(Tensor(bag.features), params, config, mode, rng)


def param_count(params) -> int:
    """Number of scalar learnables in anything exposing ``named_tensors``."""
    return int(sum(t.data.size for t in params.named_tensors().values()))


class WikgModel:
    """The WiKG bag classifier: configuration plus parameters."""

    def __init__(self, config: ModelConfig, params: WikgParams):
        self.config = config
        self.params = params

    @classmethod
    def initialize(cls, config: ModelConfig, rng: np.random.Generator) -> "WikgModel":
        return cls(config, init_wikg_params(config, rng))

    def named_tensors(self) -> Dict[str, Tensor]:
        return self.params.named_tensors()

    def forward_full(self, bag, mode: Mode = Mode.EVAL, rng=None) -> ForwardResult:
        return forward_bag(bag, self.params, self.config, mode, rng)

    def forward(self, bag, mode: Mode = Mode.EVAL, rng=None) -> Tensor:
        return self.forward_full(bag, mode, rng).logits
