"""
Argument schemas for every command.
The CLI and the command registry validate against these before anything runs.
"""

from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from wikg.core.config import TrainConfig, build_train_config, load_config_file
from wikg.core.enums import ClassifierInit, EdgePolicy, ModelKind, Precision, Readout
from wikg.services.gradcheck_suite import CHECKS


def _must_exist(value: Optional[str], what: str) -> Optional[str]:
    if value is not None and not Path(value).exists():
        raise ValueError(f"{what} not found: {value}")
    return value


def parse_k_list(value: Any) -> List[int]:
    """``"2,4,6"`` or ``[2, 4, 6]`` to a list of distinct positive ints, order kept."""
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(",") if p.strip()]
        try:
            value = [int(p) for p in parts]
        except ValueError:
            raise ValueError(f"k list must be comma-separated integers, got {value!r}") from None
    values = [int(v) for v in value]
    if not values:
        raise ValueError("k list is empty")
    if any(v < 1 for v in values):
        raise ValueError(f"every k must be >= 1, got {values}")
    if len(set(values)) != len(values):
        raise ValueError(f"k list has duplicates: {values}")
    return values


class CommandArgs(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ExperimentArgs(CommandArgs):
    """Model and optimizer overrides shared by training commands. ``None`` keeps the lower layer."""

    config: Optional[str] = Field(None, description="TOML experiment file")
    model: Optional[ModelKind] = None
    policy: Optional[EdgePolicy] = None
    k: Optional[int] = Field(None, ge=1)
    d_model: Optional[int] = Field(None, ge=1)
    readout: Optional[Readout] = None
    dropout: Optional[float] = Field(None, ge=0.0, lt=1.0)
    leaky_slope: Optional[float] = Field(None, gt=0.0, lt=1.0)
    gated_hidden: Optional[int] = Field(None, ge=1)
    exclude_self: Optional[bool] = None
    clamp_k: Optional[bool] = None
    classifier_init: Optional[ClassifierInit] = None
    epochs: Optional[int] = Field(None, ge=1)
    lr: Optional[float] = Field(None, ge=0.0)
    weight_decay: Optional[float] = Field(None, ge=0.0)
    decoupled_weight_decay: Optional[bool] = None
    inner_val_folds: Optional[int] = Field(None, ge=2)
    patience: Optional[int] = Field(None, ge=1)
    seed: Optional[int] = Field(None, ge=0)
    precision: Optional[Precision] = None

    @field_validator("config")
    @classmethod
    def config_must_exist(cls, v):
        return _must_exist(v, "config file")

    @model_validator(mode="after")
    def policy_must_fit_model(self):
        """An explicit non-default policy only applies to WiKG"""
        if self.model is not None and self.model.is_baseline and self.policy not in (None, EdgePolicy.WIKG):
            raise ValueError(f"--policy {self.policy.value} conflicts with --model {self.model.value}")
        return self

    def flag_layer(self) -> Dict[str, Any]:
        train_fields = (
            "epochs", "lr", "weight_decay", "decoupled_weight_decay", "inner_val_folds", "patience", "seed", "precision",
        )
        model_fields = {
            "model": "kind", "policy": "policy", "k": "k", "d_model": "d_model", "readout": "readout",
            "dropout": "dropout_p", "leaky_slope": "leaky_slope", "gated_hidden": "gated_hidden",
            "exclude_self": "exclude_self", "clamp_k": "clamp_k", "classifier_init": "classifier_init",
        }
        layer: Dict[str, Any] = {f: getattr(self, f) for f in train_fields if getattr(self, f) is not None}
        layer["model"] = {
            target: getattr(self, source) for source, target in model_fields.items() if getattr(self, source) is not None
        }
        return layer

    def train_config(self, defaults: Optional[Dict[str, Any]] = None) -> TrainConfig:
        """Defaults < ``defaults`` (e.g. dims from the manifest) < TOML file < flags."""
        layers = [defaults or {}]
        if self.config:
            layers.append(load_config_file(self.config))
        layers.append(self.flag_layer())
        return build_train_config(layers)


class GenArgs(CommandArgs):
    out: str
    bags: int = Field(400, ge=1)
    min_instances: int = Field(30, ge=2)
    max_instances: int = Field(80, ge=2)
    d_in: int = Field(384, ge=1)
    sigma: float = Field(0.25, ge=0.0)
    seed: int = Field(0, ge=0)
    folds: int = Field(4, ge=2)

    @model_validator(mode="after")
    def must_be_stratifiable(self):
        if self.bags // 2 < self.folds:
            raise ValueError(
                f"cannot stratify {self.bags} bags ({self.bags // 2} per class) into {self.folds} folds"
            )
        if self.bags % 2:
            raise ValueError(f"--bags must be even for a class-balanced dataset, got {self.bags}")
        if self.max_instances < self.min_instances:
            raise ValueError("--max-instances must be >= --min-instances")
        return self


class ManifestArgs(ExperimentArgs):
    manifest: str
    out: Optional[str] = None

    @field_validator("manifest")
    @classmethod
    def manifest_must_exist(cls, v):
        return _must_exist(v, "manifest")


class TrainArgs(ManifestArgs):
    fold: int = Field(0, ge=0)


class CrossValidateArgs(ManifestArgs):
    folds: int = Field(4, ge=2)
    jobs: int = Field(1, ge=1)


class SweepArgs(CrossValidateArgs):
    k_values: List[int] = Field(default_factory=lambda: [2, 4, 6, 8, 10])

    @field_validator("k_values", mode="before")
    @classmethod
    def split_k_values(cls, v):
        return parse_k_list(v)


class EvalArgs(CommandArgs):
    checkpoint: str
    manifest: str
    fold: Optional[int] = Field(None, ge=0)
    out: Optional[str] = None

    @field_validator("checkpoint")
    @classmethod
    def checkpoint_must_exist(cls, v):
        return _must_exist(v, "checkpoint")

    @field_validator("manifest")
    @classmethod
    def manifest_must_exist(cls, v):
        return _must_exist(v, "manifest")


class ExternalArgs(CommandArgs):
    """Checkpoints listed explicitly, or every ``fold_*/checkpoint.wkgc`` under ``cv_dir``."""

    manifest: str
    checkpoints: List[str] = Field(default_factory=list)
    cv_dir: Optional[str] = None
    out: Optional[str] = None

    @field_validator("manifest")
    @classmethod
    def manifest_must_exist(cls, v):
        return _must_exist(v, "manifest")

    @field_validator("checkpoints")
    @classmethod
    def checkpoints_must_exist(cls, v):
        for path in v:
            _must_exist(path, "checkpoint")
        return v

    @model_validator(mode="after")
    def needs_checkpoints(self):
        if not self.checkpoints and not self.cv_dir:
            raise ValueError("give --checkpoints or --cv-dir")
        if self.checkpoints and self.cv_dir:
            raise ValueError("--checkpoints and --cv-dir are mutually exclusive")
        _must_exist(self.cv_dir, "cross-validation directory")
        return self


class ExportGraphArgs(CommandArgs):
    checkpoint: str
    bag: str
    format: str = Field("json", pattern="^(json|dot)$")
    out: Optional[str] = None
    meta_root: Optional[str] = Field(None, description="directory holding the generator's dataset.json")

    @field_validator("checkpoint")
    @classmethod
    def checkpoint_must_exist(cls, v):
        return _must_exist(v, "checkpoint")

    @field_validator("bag")
    @classmethod
    def bag_must_exist(cls, v):
        return _must_exist(v, "bag file")


class GradcheckArgs(CommandArgs):
    op: List[str] = Field(default_factory=list)
    tol: float = Field(1e-5, gt=0.0)
    eps: float = Field(1e-6, gt=0.0)
    seeds: int = Field(1, ge=1)
    out: Optional[str] = None

    @field_validator("op", mode="before")
    @classmethod
    def split_ops(cls, v):
        if isinstance(v, str):
            return [p.strip() for p in v.split(",") if p.strip()]
        return v

    @field_validator("op")
    @classmethod
    def ops_must_be_known(cls, v):
        unknown = [name for name in v if name not in CHECKS]
        if unknown:
            raise ValueError(f"unknown checks {unknown}. Available: {sorted(CHECKS)}")
        return v


class BenchmarkArgs(ExperimentArgs):
    out: str
    bags: int = Field(400, ge=2)
    sigma: float = Field(0.25, ge=0.0)
    folds: int = Field(4, ge=2)
    data_seed: int = Field(0, ge=0)
    d_in: int = Field(384, ge=1)
    k_values: List[int] = Field(default_factory=lambda: [2, 4, 6, 8])
    jobs: int = Field(1, ge=1)

    @field_validator("k_values", mode="before")
    @classmethod
    def split_k_values(cls, v):
        return parse_k_list(v)


class ServeArgs(CommandArgs):
    checkpoint: Optional[str] = None
    host: str = "127.0.0.1"
    port: int = Field(8000, ge=1, le=65535)

    @field_validator("checkpoint")
    @classmethod
    def checkpoint_must_exist(cls, v):
        return _must_exist(v, "checkpoint")
