"""
Dynamic directed graph construction for one bag.

Each instance gets a head and a tail embedding. Under the default policy a
node's neighbors are the k tails with the largest scaled head-tail dot
product; the selected logits are softmax-normalized into edge weights
omega, and every edge carries the embedding
``r_ij = omega_ij * t_j + (1 - omega_ij) * h_i``.
The two k-NN policies choose neighbors by cosine similarity or Euclidean
distance between embeddings and keep everything else unchanged.
"""

import math
from dataclasses import dataclass
from typing import List

import numpy as np

from wikg.core.enums import EdgePolicy
from wikg.core.errors import DimensionError, InputError, ParameterError
from wikg.engine import ops
from wikg.engine.tensor import Tensor

# Added to the diagonal of the logits when self-edges are excluded
SELF_MASK = -1e9


@dataclass
class HeadTailProjector:
    """Bias-free head and tail maps, both D x D."""

    w_head: Tensor
    w_tail: Tensor

    def __post_init__(self):
        for name, w in (("w_head", self.w_head), ("w_tail", self.w_tail)):
            if w.ndim != 2 or w.shape[0] != w.shape[1]:
                raise DimensionError(f"{name} must be square, got {w.shape}")
        if self.w_head.shape != self.w_tail.shape:
            raise DimensionError("head and tail projections must have the same size")

    @property
    def dim(self) -> int:
        return self.w_head.shape[0]


@dataclass
class DirectedBagGraph:
    """Neighbors, edge weights and edge embeddings of one bag."""

    n: int
    k: int
    neighbor_idx: np.ndarray   # n x k integer
    omega: Tensor              # n x k
    edge_emb: Tensor           # n x k x D
    heads: Tensor              # n x D
    tails: Tensor              # n x D
    neighbor_tails: Tensor     # n x k x D, tails gathered by neighbor_idx
    policy: EdgePolicy = EdgePolicy.WIKG


def project_head_tail(features: Tensor, proj: HeadTailProjector):
    """``heads = X W_h^T``, ``tails = X W_t^T``."""
    if features.ndim != 2 or features.shape[0] < 1:
        raise DimensionError(f"features must be a non-empty n x D matrix, got {features.shape}")
    if features.shape[1] != proj.dim:
        raise DimensionError(f"features have {features.shape[1]} columns, projector expects {proj.dim}")
    heads = ops.matmul(features, ops.transpose(proj.w_head))
    tails = ops.matmul(features, ops.transpose(proj.w_tail))
    return heads, tails


def _check_k(n: int, k: int, exclude_self: bool) -> None:
    limit = n - 1 if exclude_self else n
    if not 1 <= k <= limit:
        suffix = " with self-edges excluded" if exclude_self else ""
        raise ParameterError(f"k={k} is invalid for a bag of {n} instances{suffix} (need 1 <= k <= {limit})")


def _self_mask(n: int, dtype) -> Tensor:
    return Tensor(np.eye(n) * SELF_MASK, dtype=dtype)


def _assemble(heads: Tensor, tails: Tensor, omega: Tensor, index: np.ndarray, policy: EdgePolicy) -> DirectedBagGraph:
    neighbor_tails = ops.gather_rows(tails, index)
    weight = ops.expand_dims(omega, -1)
    edge_emb = ops.add(
        ops.hadamard(weight, neighbor_tails),
        ops.hadamard(ops.one_minus(weight), ops.expand_dims(heads, 1)),
    )
    n, k = index.shape
    return DirectedBagGraph(
        n=n,
        k=k,
        neighbor_idx=index,
        omega=omega,
        edge_emb=edge_emb,
        heads=heads,
        tails=tails,
        neighbor_tails=neighbor_tails,
        policy=policy,
    )


def head_tail_logits(heads: Tensor, tails: Tensor) -> Tensor:
    """``L = (h * D^-1/2) t^T``"""
    dim = heads.shape[1]
    return ops.matmul(ops.scale(heads, 1.0 / math.sqrt(dim)), ops.transpose(tails))


def build_wikg_graph(heads: Tensor, tails: Tensor, k: int, exclude_self: bool = False) -> DirectedBagGraph:
    """Top-k on raw logits, then softmax over the k selected logits."""
    if heads.shape != tails.shape or heads.ndim != 2:
        raise DimensionError(f"heads {heads.shape} and tails {tails.shape} must be equal n x D")
    n = heads.shape[0]
    _check_k(n, k, exclude_self)

    logits = head_tail_logits(heads, tails)
    if exclude_self:
        logits = ops.add(logits, _self_mask(n, logits.dtype))
    top_logits, index = ops.topk_rows(logits, k)
    omega = ops.row_softmax(top_logits)
    return _assemble(heads, tails, omega, index, EdgePolicy.WIKG)


def pairwise_scores(features: np.ndarray, policy: EdgePolicy) -> np.ndarray:
    """
    Similarity used by the k-NN policies: cosine similarity, or negated
    Euclidean distance so larger is always closer.
    """
    x = np.asarray(features, dtype=np.float64)
    if policy is EdgePolicy.KNN_COS:
        norms = np.linalg.norm(x, axis=1)
        zero = np.flatnonzero(norms == 0)
        if zero.size:
            raise InputError(f"cosine similarity undefined for zero-norm rows {zero.tolist()}")
        unit = x / norms[:, None]
        return unit @ unit.T
    if policy is EdgePolicy.KNN_DIST:
        diff = x[:, None, :] - x[None, :, :]
        return -np.sqrt((diff * diff).sum(axis=-1))
    raise ParameterError(f"{policy} is not a k-NN policy")


def build_knn_graph(
    features: Tensor,
    heads: Tensor,
    tails: Tensor,
    policy: EdgePolicy,
    k: int,
    exclude_self: bool = False,
) -> DirectedBagGraph:
    """
    Neighbors by cosine similarity or Euclidean distance over ``features``.

    Selection runs on detached float64 scores; the selected scores are then
    recomputed on the tape so omega, their softmax over the neighbors,
    carries gradients back into ``features``. Edge embeddings follow the
    same rule as the default policy.
    """
    if features.ndim != 2 or features.shape[0] != heads.shape[0]:
        raise DimensionError(f"features {features.shape} do not match heads {heads.shape}")
    n = features.shape[0]
    _check_k(n, k, exclude_self)

    scores = pairwise_scores(features.data, policy)
    if exclude_self:
        scores = scores + np.eye(n) * SELF_MASK
    # select in float64 so float32 rounding cannot create ties
    _, index = ops.topk_rows(Tensor(scores, dtype=np.float64), k)
    omega = ops.row_softmax(selected_scores(features, index, policy))
    return _assemble(heads, tails, omega, index, policy)


def selected_scores(features: Tensor, index: np.ndarray, policy: EdgePolicy) -> Tensor:
    """``pairwise_scores`` at ``(i, index[i, j])``, on the tape."""
    if policy is EdgePolicy.KNN_COS:
        unit = ops.l2_normalize(features)
        return ops.reduce_sum(ops.hadamard(ops.expand_dims(unit, 1), ops.gather_rows(unit, index)), axis=-1)
    if policy is EdgePolicy.KNN_DIST:
        diff = ops.subtract(ops.expand_dims(features, 1), ops.gather_rows(features, index))
        return ops.scale(ops.l2_norm(diff), -1.0)
    raise ParameterError(f"{policy} is not a k-NN policy")


def build_graph(
    features: Tensor,
    proj: HeadTailProjector,
    policy: EdgePolicy,
    k: int,
    exclude_self: bool = False,
) -> DirectedBagGraph:
    """Project and connect according to ``policy``."""
    heads, tails = project_head_tail(features, proj)
    if policy is EdgePolicy.WIKG:
        return build_wikg_graph(heads, tails, k, exclude_self)
    return build_knn_graph(features, heads, tails, policy, k, exclude_self)


def validate_graph(graph: DirectedBagGraph, atol: float = 1e-6) -> List[str]:
    """
    Structural checks shared by every policy. Returns the list of
    violations; an empty list means the graph is well formed.
    """
    problems: List[str] = []
    n, k = graph.n, graph.k
    idx = graph.neighbor_idx
    if idx.shape != (n, k):
        problems.append(f"neighbor_idx has shape {idx.shape}, expected {(n, k)}")
        return problems
    if idx.min() < 0 or idx.max() >= n:
        problems.append("neighbor index out of range")
    omega = graph.omega.data.astype(np.float64)
    if omega.shape != (n, k):
        problems.append(f"omega has shape {omega.shape}, expected {(n, k)}")
        return problems
    row_error = np.abs(omega.sum(axis=1) - 1.0).max()
    if row_error > atol:
        problems.append(f"omega rows sum to 1 only within {row_error:.3g}")
    if omega.min() < 0 or omega.max() > 1:
        problems.append("omega entries outside [0, 1]")
    heads = graph.heads.data.astype(np.float64)
    tails = graph.tails.data.astype(np.float64)
    expected = omega[..., None] * tails[idx] + (1 - omega[..., None]) * heads[:, None, :]
    emb_error = np.abs(graph.edge_emb.data - expected).max() if expected.size else 0.0
    scale = max(1.0, float(np.abs(expected).max())) if expected.size else 1.0
    if emb_error > atol * scale:
        problems.append(f"edge embeddings deviate from the convex combination by {emb_error:.3g}")
    return problems

