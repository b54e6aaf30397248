"""Build or restore any bag classifier from its configuration."""

from typing import Dict, Union

import numpy as np

from wikg.core.config import ModelConfig
from wikg.core.enums import ModelKind
from wikg.engine.tensor import Tensor
from wikg.services.baseline_service import BaselineModel, baseline_params_from_tensors
from wikg.services.model_service import WikgModel, wikg_params_from_tensors

BagClassifier = Union[WikgModel, BaselineModel]


def build_classifier(config: ModelConfig, rng: np.random.Generator) -> BagClassifier:
    if config.kind is ModelKind.WIKG:
        return WikgModel.initialize(config, rng)
    return BaselineModel.initialize(config, rng)


def classifier_from_tensors(config: ModelConfig, tensors: Dict[str, Tensor]) -> BagClassifier:
    if config.kind is ModelKind.WIKG:
        return WikgModel(config, wikg_params_from_tensors(tensors, config.leaky_slope))
    return BaselineModel(config, baseline_params_from_tensors(tensors))


def snapshot(model: BagClassifier) -> Dict[str, np.ndarray]:
    """Copies of every parameter array, keyed by name."""
    return {name: t.data.copy() for name, t in model.named_tensors().items()}


def model_dtype(model: BagClassifier) -> np.dtype:
    """Storage precision of a classifier's parameters."""
    return next(iter(model.named_tensors().values())).dtype
