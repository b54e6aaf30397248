"""
Tests for graph construction: top-k selection, edge weights, edge
embeddings and the k-NN policies, checked against brute-force oracles.
"""

import math

import numpy as np
import pytest

from wikg.core.enums import EdgePolicy
from wikg.core.errors import DimensionError, InputError, ParameterError
from wikg.engine import ops
from wikg.engine.rng import make_rng
from wikg.engine.tensor import Tape, Tensor
from wikg.services.graph_service import (
    HeadTailProjector,
    build_graph,
    build_knn_graph,
    build_wikg_graph,
    pairwise_scores,
    project_head_tail,
    validate_graph,
)


def t64(data, grad=False):
    return Tensor(data, requires_grad=grad, dtype=np.float64)


def _softmax(values):
    e = [math.exp(v - max(values)) for v in values]
    return [v / sum(e) for v in e]


def _ranked(scores, exclude=None):
    """Column indices by descending score, ties to the lower index."""
    return sorted((j for j in range(len(scores)) if j != exclude), key=lambda j: (-scores[j], j))


def test_wikg_graph_matches_oracle():
    rng = make_rng(1)
    for _ in range(1000):
        n, d = int(rng.integers(1, 13)), int(rng.integers(1, 5))
        k = int(rng.integers(1, n + 1))
        h, t = rng.standard_normal((n, d)), rng.standard_normal((n, d))
        graph = build_wikg_graph(t64(h), t64(t), k)

        for i in range(n):
            logits = [sum(h[i, c] * t[j, c] for c in range(d)) / math.sqrt(d) for j in range(n)]
            chosen = _ranked(logits)[:k]
            assert graph.neighbor_idx[i].tolist() == chosen
            omega = _softmax([logits[j] for j in chosen])
            assert np.allclose(graph.omega.data[i], omega, atol=1e-12)
            for slot, j in enumerate(chosen):
                r = omega[slot] * t[j] + (1 - omega[slot]) * h[i]
                assert np.allclose(graph.edge_emb.data[i, slot], r, atol=1e-10)


@pytest.mark.parametrize("policy", [EdgePolicy.KNN_COS, EdgePolicy.KNN_DIST])
def test_knn_graph_matches_oracle(policy):
    rng = make_rng(2)
    for _ in range(300):
        n, d = int(rng.integers(1, 13)), int(rng.integers(1, 5))
        x = rng.standard_normal((n, d))
        for k in range(1, n + 1):
            graph = build_knn_graph(t64(x), t64(x), t64(x), policy, k)
            for i in range(n):
                if policy is EdgePolicy.KNN_COS:
                    scores = [
                        float(np.dot(x[i], x[j]) / (np.linalg.norm(x[i]) * np.linalg.norm(x[j])))
                        for j in range(n)
                    ]
                else:
                    scores = [-float(np.linalg.norm(x[i] - x[j])) for j in range(n)]
                chosen = _ranked(scores)[:k]
                assert graph.neighbor_idx[i].tolist() == chosen
                assert np.allclose(graph.omega.data[i], _softmax([scores[j] for j in chosen]), atol=1e-9)


@pytest.mark.parametrize("policy", list(EdgePolicy))
def test_structural_invariants(policy):
    rng = make_rng(3)
    proj = HeadTailProjector(t64(rng.standard_normal((4, 4))), t64(rng.standard_normal((4, 4))))
    for _ in range(50):
        n = int(rng.integers(2, 12))
        k = int(rng.integers(1, n + 1))
        graph = build_graph(t64(rng.standard_normal((n, 4))), proj, policy, k)
        assert graph.neighbor_idx.shape == (n, k)
        assert all(len(set(row)) == k for row in graph.neighbor_idx.tolist())
        assert validate_graph(graph) == []


def test_ties_go_to_lower_index():
    h = t64(np.ones((5, 3)))
    t = t64(np.ones((5, 3)))
    graph = build_wikg_graph(h, t, 3)
    assert graph.neighbor_idx.tolist() == [[0, 1, 2]] * 5
    assert np.allclose(graph.omega.data, 1 / 3)


@pytest.mark.parametrize("policy", list(EdgePolicy))
def test_exclude_self(policy):
    rng = make_rng(4)
    x = rng.standard_normal((6, 3))
    proj = HeadTailProjector(t64(np.eye(3)), t64(np.eye(3)))
    graph = build_graph(t64(x), proj, policy, 5, exclude_self=True)
    for i, row in enumerate(graph.neighbor_idx.tolist()):
        assert i not in row
    with pytest.raises(ParameterError):
        build_graph(t64(x), proj, policy, 6, exclude_self=True)


def test_self_edges_allowed_by_default():
    # identical heads and tails make each node its own best match under cosine
    x = make_rng(5).standard_normal((4, 3))
    graph = build_knn_graph(t64(x), t64(x), t64(x), EdgePolicy.KNN_COS, 1)
    assert graph.neighbor_idx[:, 0].tolist() == [0, 1, 2, 3]


def test_k_out_of_range():
    h = t64(np.ones((3, 2)))
    for k in (0, 4):
        with pytest.raises(ParameterError):
            build_wikg_graph(h, h, k)


def test_zero_norm_row_under_cosine():
    x = np.array([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(InputError):
        pairwise_scores(x, EdgePolicy.KNN_COS)


def test_projection_dimensions():
    proj = HeadTailProjector(t64(np.eye(3)), t64(np.eye(3)))
    with pytest.raises(DimensionError):
        project_head_tail(t64(np.ones((4, 2))), proj)
    with pytest.raises(DimensionError):
        HeadTailProjector(t64(np.ones((3, 2))), t64(np.ones((3, 2))))


@pytest.mark.parametrize("policy", list(EdgePolicy))
def test_omega_carries_gradient_under_every_policy(policy):
    rng = make_rng(6)
    x = rng.standard_normal((5, 3))
    weights = t64(rng.standard_normal((5, 2)))

    features = t64(x, grad=True)
    proj = HeadTailProjector(t64(rng.standard_normal((3, 3))), t64(rng.standard_normal((3, 3))))
    with Tape() as tape:
        graph = build_graph(features, proj, policy, 2)
        loss = ops.sum_all(ops.hadamard(graph.omega, weights))
    tape.backward(loss)
    assert features.grad is not None and np.any(features.grad != 0)


@pytest.mark.parametrize("policy", [EdgePolicy.KNN_COS, EdgePolicy.KNN_DIST])
def test_knn_omega_gradient_matches_finite_differences(policy):
    rng = make_rng(7)
    x = rng.standard_normal((6, 3))
    weights = rng.standard_normal((6, 3))
    index = build_knn_graph(t64(x), t64(x), t64(x), policy, 3).neighbor_idx

    def objective(data):
        scores = pairwise_scores(data, policy)
        picked = np.take_along_axis(scores, index, axis=1)
        e = np.exp(picked - picked.max(axis=1, keepdims=True))
        return float((e / e.sum(axis=1, keepdims=True) * weights).sum())

    features = t64(x, grad=True)
    with Tape() as tape:
        graph = build_knn_graph(features, t64(x), t64(x), policy, 3)
        loss = ops.sum_all(ops.hadamard(graph.omega, t64(weights)))
    tape.backward(loss)

    eps = 1e-6
    numeric = np.zeros_like(x)
    for i in range(x.shape[0]):
        for c in range(x.shape[1]):
            up, down = x.copy(), x.copy()
            up[i, c] += eps
            down[i, c] -= eps
            numeric[i, c] = (objective(up) - objective(down)) / (2 * eps)
    assert np.allclose(features.grad, numeric, atol=1e-6)


def test_all_equal_logits_with_k_equal_to_n():
    h = t64([[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
    t = t64([[0.0, 2.0], [0.0, -1.0], [0.0, 5.0]])
    graph = build_wikg_graph(h, t, 3)
    assert graph.neighbor_idx.tolist() == [[0, 1, 2]] * 3
    assert np.allclose(graph.omega.data, 1 / 3)
    for i in range(3):
        for slot, j in enumerate(graph.neighbor_idx[i]):
            assert np.allclose(graph.edge_emb.data[i, slot], (t.data[j] + 2 * h.data[i]) / 3)


def test_node_permutation_relabels_the_graph():
    rng = make_rng(8)
    n, d, k = 9, 4, 3
    h, t = rng.standard_normal((n, d)), rng.standard_normal((n, d))
    perm = rng.permutation(n)
    inverse = np.argsort(perm)
    graph = build_wikg_graph(t64(h), t64(t), k)
    permuted = build_wikg_graph(t64(h[perm]), t64(t[perm]), k)
    for a in range(n):
        original = perm[a]
        assert sorted(permuted.neighbor_idx[a].tolist()) == sorted(inverse[graph.neighbor_idx[original]].tolist())
        assert np.allclose(np.sort(permuted.omega.data[a]), np.sort(graph.omega.data[original]))
        assert np.allclose(permuted.edge_emb.data[a], graph.edge_emb.data[original])


def test_selection_is_invariant_to_joint_positive_scaling():
    rng = make_rng(9)
    h, t = rng.standard_normal((10, 5)), rng.standard_normal((10, 5))
    reference = build_wikg_graph(t64(h), t64(t), 4).neighbor_idx
    for c in (0.01, 0.5, 3.0, 40.0):
        scaled = build_wikg_graph(t64(h * c), t64(t * c), 4)
        assert np.array_equal(scaled.neighbor_idx, reference)
