"""
Centralized configuration using Pydantic Settings.
Runtime settings come from the environment / .env; experiment
settings (model and optimizer) are plain validated models.
"""

from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Union

import toml

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from wikg.core.enums import ClassifierInit, EdgePolicy, ModelKind, Precision, Readout


class Settings(BaseSettings):
    """Application settings loaded from .env"""

    model_config = SettingsConfigDict(
        env_prefix="WIKG_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Logging & auditing
    log_level: str = "INFO"
    log_run_events: bool = True
    enable_command_auditing: bool = True

    # Numerics
    precision: Precision = Precision.FLOAT32

    # Artifacts
    output_dir: str = "runs"

    # Inference service
    checkpoint_path: Optional[str] = None
    max_instances_per_request: int = 20000


class ModelConfig(BaseModel):
    """Architecture of a bag classifier. Stored in every checkpoint."""

    model_config = ConfigDict(extra="forbid")

    kind: ModelKind = ModelKind.WIKG
    d_in: int = Field(default=384, ge=1)
    d_model: int = Field(default=512, ge=1)
    n_classes: int = Field(default=2, ge=2)
    k: int = Field(default=6, ge=1)
    policy: EdgePolicy = EdgePolicy.WIKG
    leaky_slope: float = Field(default=0.2, gt=0.0, lt=1.0)
    readout: Readout = Readout.MEAN
    dropout_p: float = Field(default=0.3, ge=0.0, lt=1.0)
    exclude_self: bool = False
    clamp_k: bool = False
    gated_hidden: int = Field(default=128, ge=1)
    classifier_init: ClassifierInit = ClassifierInit.XAVIER

    @model_validator(mode="after")
    def policy_only_for_wikg(self):
        """Baselines build no graph"""
        if self.kind.is_baseline and self.policy is not EdgePolicy.WIKG:
            raise ValueError(f"edge policy {self.policy.value} cannot be combined with the {self.kind.value} baseline")
        return self


class TrainConfig(BaseModel):
    """Optimizer and loop settings. Defaults are the published ones."""

    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(default=100, ge=1)
    lr: float = Field(default=1e-4, ge=0.0)
    weight_decay: float = Field(default=1e-5, ge=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)
    batch_size: int = 1
    decoupled_weight_decay: bool = False
    inner_val_folds: Optional[int] = Field(
        default=None, ge=2, description="pick checkpoints on 1/N of the training bags instead of the held-out fold"
    )
    patience: Optional[int] = Field(
        default=None, ge=1, description="stop after this many epochs without a better validation AUC"
    )
    seed: int = Field(default=0, ge=0)
    precision: Precision = Precision.FLOAT32
    model: ModelConfig = Field(default_factory=ModelConfig)

    @field_validator("batch_size")
    @classmethod
    def batch_size_must_be_one(cls, v):
        """Bags have different sizes; one bag per step"""
        if v != 1:
            raise ValueError("batch_size is fixed at 1")
        return v


# Global settings instance
settings = Settings()


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read an experiment TOML file: top-level keys are ``TrainConfig`` fields,
    the ``[model]`` table holds ``ModelConfig`` fields.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    return toml.load(path)


def build_train_config(layers: Sequence[Dict[str, Any]]) -> TrainConfig:
    """Merge layers left to right (later wins, ``model`` merged key by key) and validate."""
    merged: Dict[str, Any] = {}
    model: Dict[str, Any] = {}
    for layer in layers:
        layer = dict(layer)
        model.update(layer.pop("model", None) or {})
        merged.update(layer)
    return TrainConfig(**merged, model=ModelConfig(**model))
