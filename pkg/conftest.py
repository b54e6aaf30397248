"""Shared fixtures: a tiny generated dataset and a fast training configuration."""

import pytest

from wikg.core.config import ModelConfig, TrainConfig
from wikg.services.data_service import gen_cooccurrence_dataset
from wikg.services.train_service import train

SMALL_D_IN = 8


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Eight bags of 6-10 instances in two stratified folds."""
    out = tmp_path_factory.mktemp("small_dataset")
    return gen_cooccurrence_dataset(
        out, n_bags=8, instances=(6, 10), d_in=SMALL_D_IN, noise_sigma=0.25, seed=3, folds=2
    )


@pytest.fixture
def small_config():
    return TrainConfig(
        epochs=2,
        lr=1e-3,
        seed=1,
        precision="float64",
        model=ModelConfig(d_in=SMALL_D_IN, d_model=8, k=3),
    )


@pytest.fixture(scope="session")
def trained_checkpoint(small_dataset, tmp_path_factory):
    config = TrainConfig(
        epochs=2, lr=1e-3, seed=1, precision="float64", model=ModelConfig(d_in=SMALL_D_IN, d_model=8, k=3)
    )
    result = train(small_dataset.manifest, 0, config, tmp_path_factory.mktemp("trained"))
    return result.checkpoint_path
