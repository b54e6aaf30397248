"""
Finite-difference checks for every differentiable op and for full models.

Each op is reduced to a scalar by a fixed random projection
``sum(op(x) * w)`` so that every output element contributes a distinct
gradient. Shapes are drawn per seed. Everything runs in 64-bit precision.
"""

from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from wikg.core.config import ModelConfig
from wikg.core.enums import EdgePolicy, ModelKind, Precision
from wikg.core.errors import ParameterError
from wikg.core.logging import logger
from wikg.engine import ops
from wikg.engine.gradcheck import DEFAULT_EPS, DEFAULT_TOL, gradcheck
from wikg.engine.rng import derive_rng, make_rng
from wikg.engine.tensor import Tensor, precision
from wikg.schemas.reports import GradcheckReport
from wikg.services.classifier_service import build_classifier
from wikg.services.data_service import Bag
from wikg.services.model_service import forward_features

Case = Tuple[Callable[..., Tensor], List[Tensor]]


def _param(rng: np.random.Generator, *shape: int, name: str = "x") -> Tensor:
    return Tensor(rng.standard_normal(shape), requires_grad=True, name=name)


def _projection(out: Tensor, rng: np.random.Generator) -> Callable[[Tensor], Tensor]:
    weights = Tensor(rng.standard_normal(out.shape))
    return lambda y: ops.sum_all(ops.hadamard(y, weights))


def _unary(op: Callable[[Tensor], Tensor]) -> Callable[[np.random.Generator], Case]:
    def build(rng: np.random.Generator) -> Case:
        m, n = (int(v) for v in rng.integers(2, 6, size=2))
        x = _param(rng, m, n)
        project = _projection(op(x), rng)
        return (lambda a: project(op(a))), [x]
    return build


def _binary(op: Callable[[Tensor, Tensor], Tensor], broadcast: bool = False) -> Callable[[np.random.Generator], Case]:
    def build(rng: np.random.Generator) -> Case:
        m, n = (int(v) for v in rng.integers(2, 6, size=2))
        a = _param(rng, m, n, name="a")
        b = _param(rng, n, name="b") if broadcast else _param(rng, m, n, name="b")
        project = _projection(op(a, b), rng)
        return (lambda x, y: project(op(x, y))), [a, b]
    return build


def _matmul(rng: np.random.Generator) -> Case:
    m, k, n = (int(v) for v in rng.integers(2, 6, size=3))
    a, b = _param(rng, m, k, name="a"), _param(rng, k, n, name="b")
    project = _projection(ops.matmul(a, b), rng)
    return (lambda x, y: project(ops.matmul(x, y))), [a, b]


def _scale(rng: np.random.Generator) -> Case:
    c = float(rng.uniform(-2.0, 2.0))
    return _unary(lambda x: ops.scale(x, c))(rng)


def _leaky_relu(rng: np.random.Generator) -> Case:
    slope = float(rng.uniform(0.05, 0.95))
    return _unary(lambda x: ops.leaky_relu(x, slope))(rng)


def _topk(rng: np.random.Generator) -> Case:
    m, n = int(rng.integers(2, 6)), int(rng.integers(2, 9))
    k = int(rng.integers(1, n + 1))
    x = _param(rng, m, n)
    project = _projection(ops.topk_rows(x, k)[0], rng)
    return (lambda a: project(ops.topk_rows(a, k)[0])), [x]


def _gather_rows(rng: np.random.Generator) -> Case:
    m, n = (int(v) for v in rng.integers(2, 6, size=2))
    # repeated rows exercise gradient accumulation
    index = rng.integers(0, m, size=(m, 3))
    x = _param(rng, m, n)
    project = _projection(ops.gather_rows(x, index), rng)
    return (lambda a: project(ops.gather_rows(a, index))), [x]


def _concat_rows(rng: np.random.Generator) -> Case:
    n = int(rng.integers(2, 6))
    a = _param(rng, int(rng.integers(1, 4)), n, name="a")
    b = _param(rng, int(rng.integers(1, 4)), n, name="b")
    project = _projection(ops.concat_rows([a, b]), rng)
    return (lambda x, y: project(ops.concat_rows([x, y]))), [a, b]


def _dropout(rng: np.random.Generator) -> Case:
    mask_seed = int(rng.integers(0, 2**31))
    return _unary(lambda x: ops.dropout(x, 0.3, True, make_rng(mask_seed)))(rng)


def _cross_entropy(rng: np.random.Generator) -> Case:
    n_classes = int(rng.integers(2, 6))
    label = int(rng.integers(0, n_classes))
    logits = _param(rng, 1, n_classes, name="logits")
    return (lambda z: ops.cross_entropy(z, label)), [logits]


def _model(kind: ModelKind, policy: EdgePolicy = EdgePolicy.WIKG) -> Callable[[np.random.Generator], Case]:
    """Cross-entropy of a small classifier over all of its parameters."""
    def build(rng: np.random.Generator) -> Case:
        n_classes = int(rng.integers(2, 4))
        config = ModelConfig(
            kind=kind, d_in=6, d_model=5, n_classes=n_classes, k=4, policy=policy, gated_hidden=4,
        )
        model = build_classifier(config, rng)
        bag = Bag(id="check", features=rng.standard_normal((12, 6)), label=int(rng.integers(0, n_classes)))
        return (lambda *_: ops.cross_entropy(model.forward(bag), bag.label)), list(model.named_tensors().values())
    return build


def _model_features(policy: EdgePolicy) -> Callable[[np.random.Generator], Case]:
    """Cross-entropy of a small WiKG classifier with respect to the bag features."""
    def build(rng: np.random.Generator) -> Case:
        config = ModelConfig(d_in=6, d_model=5, n_classes=2, k=4, policy=policy)
        model = build_classifier(config, rng)
        features = _param(rng, 12, 6, name="features")
        label = int(rng.integers(0, 2))
        return (
            lambda x: ops.cross_entropy(forward_features(x, model.params, model.config).logits, label)
        ), [features]
    return build


CHECKS: Dict[str, Callable[[np.random.Generator], Case]] = {
    "matmul": _matmul,
    "softmax": _unary(ops.row_softmax),
    "tanh": _unary(ops.tanh_op),
    "sigmoid": _unary(ops.sigmoid),
    "leaky_relu": _leaky_relu,
    "topk": _topk,
    "mean": _unary(ops.reduce_mean_rows),
    "max": _unary(ops.reduce_max_rows),
    "cross_entropy": _cross_entropy,
    "add": _binary(ops.add, broadcast=True),
    "subtract": _binary(ops.subtract),
    "hadamard": _binary(ops.hadamard),
    "scale": _scale,
    "transpose": _unary(ops.transpose),
    "gather_rows": _gather_rows,
    "concat_rows": _concat_rows,
    "dropout": _dropout,
    "l2_norm": _unary(ops.l2_norm),
    "l2_normalize": _unary(ops.l2_normalize),
    "wikg": _model(ModelKind.WIKG),
    "wikg_knn_cos": _model(ModelKind.WIKG, EdgePolicy.KNN_COS),
    "wikg_knn_dist": _model(ModelKind.WIKG, EdgePolicy.KNN_DIST),
    "wikg_features": _model_features(EdgePolicy.WIKG),
    "wikg_knn_cos_features": _model_features(EdgePolicy.KNN_COS),
    "abmil": _model(ModelKind.ABMIL),
}

MODEL_CHECKS = tuple(name for name in CHECKS if name.startswith(("wikg", "abmil")))


def run_gradcheck_suite(
    ops_filter: Optional[Sequence[str]] = None,
    tol: float = DEFAULT_TOL,
    eps: float = DEFAULT_EPS,
    seeds: int = 1,
    base_seed: int = 0,
) -> List[GradcheckReport]:
    """One report per (check, seed)."""
    names = list(CHECKS) if not ops_filter else list(ops_filter)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ParameterError(f"unknown gradcheck ops {unknown}; available: {sorted(CHECKS)}")
    if seeds < 1:
        raise ParameterError(f"seeds must be >= 1, got {seeds}")

    reports = []
    with precision(Precision.FLOAT64):
        for name in names:
            for seed in range(base_seed, base_seed + seeds):
                f, inputs = CHECKS[name](derive_rng(seed, "gradcheck", name))
                report = gradcheck(f, inputs, eps=eps, tol=tol, name=name)
                report.seed = seed
                if not report.passed:
                    logger.warning(
                        f"gradcheck {name} (seed {seed}) failed: max rel. error "
                        f"{report.max_rel_error:.3e} at {report.worst_element}"
                    )
                reports.append(report)
    return reports
