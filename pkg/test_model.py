"""
Tests for the WiKG classifier: attention, dual interaction, readout and
the full forward pass.
"""

import math

import numpy as np
import pytest

from wikg.core.config import ModelConfig
from wikg.core.enums import ClassifierInit, EdgePolicy, Mode, Readout
from wikg.core.errors import DimensionError, ParameterError
from wikg.engine import ops
from wikg.engine.gradcheck import gradcheck
from wikg.engine.rng import make_rng
from wikg.engine.tensor import Tensor, precision
from wikg.services.data_service import Bag
from wikg.services.graph_service import build_wikg_graph
from wikg.services.model_service import (
    WikgModel,
    dual_interaction,
    init_wikg_params,
    knowledge_attention,
    param_count,
    readout,
    resolve_k,
)


def t64(data):
    return Tensor(data, dtype=np.float64)


def _leaky(v, slope):
    return v if v > 0 else slope * v


def small_model(seed=0, **overrides) -> WikgModel:
    config = ModelConfig(**{"d_in": 6, "d_model": 5, "k": 3, **overrides})
    with precision("float64"):
        return WikgModel.initialize(config, make_rng(seed))


def test_attention_matches_per_element_oracle():
    rng = make_rng(7)
    for _ in range(1000):
        n, d = int(rng.integers(1, 11)), int(rng.integers(1, 5))
        k = int(rng.integers(1, min(n, 4) + 1))
        h, t = rng.standard_normal((n, d)), rng.standard_normal((n, d))
        graph = build_wikg_graph(t64(h), t64(t), k)
        trace = knowledge_attention(graph)
        r = graph.edge_emb.data

        for i in range(n):
            u = []
            for slot, j in enumerate(graph.neighbor_idx[i]):
                u.append(sum(t[j, c] * math.tanh(h[i, c] + r[i, slot, c]) for c in range(d)))
            assert np.allclose(trace.u.data[i], u, atol=1e-10)
            e = [math.exp(v - max(u)) for v in u]
            pi = [v / sum(e) for v in e]
            assert np.allclose(trace.pi.data[i], pi, atol=1e-10)
            h_nbr = [sum(pi[s] * t[j, c] for s, j in enumerate(graph.neighbor_idx[i])) for c in range(d)]
            assert np.allclose(trace.h_nbr.data[i], h_nbr, atol=1e-10)


def test_dual_interaction_matches_oracle():
    rng = make_rng(8)
    model = small_model()
    params = model.params
    params.b1.data = rng.standard_normal(5)
    params.b2.data = rng.standard_normal(5)
    h, h_nbr = rng.standard_normal((4, 5)), rng.standard_normal((4, 5))
    out = dual_interaction(t64(h), t64(h_nbr), params).data

    w1, b1, w2, b2 = params.w1.data, params.b1.data, params.w2.data, params.b2.data
    for i in range(4):
        for c in range(5):
            additive = sum((h[i, r] + h_nbr[i, r]) * w1[r, c] for r in range(5)) + b1[c]
            multiplicative = sum(h[i, r] * h_nbr[i, r] * w2[r, c] for r in range(5)) + b2[c]
            expected = _leaky(additive, 0.2) + _leaky(multiplicative, 0.2)
            assert out[i, c] == pytest.approx(expected, abs=1e-10)


def test_dual_interaction_shape_mismatch():
    model = small_model()
    with pytest.raises(DimensionError):
        dual_interaction(t64(np.ones((3, 5))), t64(np.ones((2, 5))), model.params)


def test_readout():
    x = t64([[1, 4], [3, 2]])
    assert readout(x, Readout.MEAN).data.tolist() == [[2, 3]]
    assert readout(x, Readout.MAX).data.tolist() == [[3, 4]]


def test_attention_rows_sum_to_one():
    model = small_model(seed=2)
    bag = Bag(id="b", features=make_rng(2).standard_normal((9, 6)))
    with precision("float64"):
        result = model.forward_full(bag)
    assert np.allclose(result.trace.pi.data.sum(axis=1), 1, atol=1e-6)
    assert np.allclose(result.graph.omega.data.sum(axis=1), 1, atol=1e-6)


@pytest.mark.parametrize("policy", list(EdgePolicy))
def test_mean_readout_is_permutation_invariant(policy):
    for seed in range(100):
        rng = make_rng(seed)
        model = small_model(seed=seed, policy=policy)
        features = rng.standard_normal((8, 6))
        permuted = features[rng.permutation(8)]
        with precision("float64"):
            a = model.forward(Bag(id="a", features=features)).data
            b = model.forward(Bag(id="b", features=permuted)).data
        assert np.allclose(a, b, atol=1e-5)


@pytest.mark.parametrize("n_classes", [2, 3, 5])
def test_first_step_loss_is_log_c_with_zero_classifier(n_classes):
    model = small_model(n_classes=n_classes, classifier_init=ClassifierInit.ZERO)
    bag = Bag(id="b", features=make_rng(1).standard_normal((7, 6)), label=1)
    with precision("float64"):
        loss = ops.cross_entropy(model.forward(bag, Mode.TRAIN, make_rng(0)), bag.label).item()
    assert loss == pytest.approx(math.log(n_classes), abs=1e-12)


def test_resolve_k():
    assert resolve_k(10, ModelConfig(k=6)) == 6
    with pytest.raises(ParameterError):
        resolve_k(4, ModelConfig(k=6))
    assert resolve_k(4, ModelConfig(k=6, clamp_k=True)) == 4
    assert resolve_k(4, ModelConfig(k=6, clamp_k=True, exclude_self=True)) == 3


def test_small_bag_without_clamp_fails():
    model = small_model(k=6)
    with precision("float64"):
        with pytest.raises(ParameterError):
            model.forward(Bag(id="b", features=np.ones((4, 6))))


def test_dropout_only_in_train_mode():
    model = small_model(dropout_p=0.5)
    bag = Bag(id="b", features=make_rng(3).standard_normal((10, 6)))
    with precision("float64"):
        first = model.forward(bag, Mode.EVAL).data
        second = model.forward(bag, Mode.EVAL).data
        trained = model.forward(bag, Mode.TRAIN, make_rng(9)).data
    assert np.array_equal(first, second)
    assert not np.allclose(first, trained)


def test_input_dimension_mismatch():
    model = small_model()
    with precision("float64"):
        with pytest.raises(DimensionError):
            model.forward(Bag(id="b", features=np.ones((5, 7))))


def test_param_count():
    # input 6x5+5, head/tail 2x25, W1/W2 2x(25+5), classifier 5x2+2
    assert param_count(small_model()) == 157


def test_param_count_at_published_defaults():
    config = ModelConfig()
    assert param_count(WikgModel.initialize(config, make_rng(0))) == 1_247_746
    wider = config.model_copy(update={"n_classes": 3})
    assert param_count(WikgModel.initialize(wider, make_rng(0))) == 1_247_746 + 513


def test_parameter_names():
    assert set(small_model().named_tensors()) == {
        "input_proj.weight", "input_proj.bias", "head.weight", "tail.weight",
        "w1.weight", "w1.bias", "w2.weight", "w2.bias", "classifier.weight", "classifier.bias",
    }


def test_full_model_gradcheck_on_twelve_instances():
    model = small_model(seed=5)
    bag = Bag(id="b", features=make_rng(5).standard_normal((12, 6)), label=1)
    with precision("float64"):
        report = gradcheck(
            lambda *_: ops.cross_entropy(model.forward(bag), bag.label),
            list(model.named_tensors().values()),
            name="wikg",
        )
    assert report.passed, report
    assert report.n_checked == 157


def test_init_is_seeded():
    a = init_wikg_params(ModelConfig(d_in=6, d_model=5), make_rng(4))
    b = init_wikg_params(ModelConfig(d_in=6, d_model=5), make_rng(4))
    for name, tensor in a.named_tensors().items():
        assert np.array_equal(tensor.data, b.named_tensors()[name].data)
