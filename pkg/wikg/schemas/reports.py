"""
Result schemas for gradient checks, training, evaluation and sweeps.
Everything written to disk as JSON goes through these models.
"""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from wikg.core.config import ModelConfig
from wikg.core.enums import CheckpointSelection


class GradcheckReport(BaseModel):
    """Outcome of one finite-difference check"""
    name: str
    seed: Optional[int] = None
    max_rel_error: float
    worst_element: Optional[str] = None
    n_checked: int
    tol: float
    passed: bool


class MetricsReport(BaseModel):
    """One evaluation pass. Accuracy and F1 in percent, AUC as a fraction."""
    accuracy: float
    auc: Optional[float] = Field(None, ge=0.0, le=1.0)
    weighted_f1: float
    per_class_accuracy: List[Optional[float]]
    confusion: List[List[int]] = Field(..., description="rows = true class, columns = predicted")
    n_eval: int


class EpochRecord(BaseModel):
    """One line of the per-epoch log"""
    epoch: int
    train_loss: float
    val_auc: Optional[float] = None
    seconds: float


class TrainResult(BaseModel):
    """Outcome of one training run"""
    run: str
    checkpoint_path: str
    log_path: str
    best_epoch: int
    best_val_auc: Optional[float] = None
    param_count: int
    mean_epoch_seconds: float
    history: List[EpochRecord]
    stopped_early: bool = False
    selection: CheckpointSelection = CheckpointSelection.HELD_OUT_FOLD


class MetricSummary(BaseModel):
    """Mean and sample standard deviation across folds"""
    mean: Optional[float] = None
    std: Optional[float] = None
    n: int


class FoldResult(BaseModel):
    fold: int
    train: TrainResult
    metrics: MetricsReport


class CrossValidationSummary(BaseModel):
    """Per-fold metrics plus their aggregate"""
    model: ModelConfig
    folds: List[FoldResult]
    summary: Dict[str, MetricSummary]
    std_kind: str = "sample standard deviation (ddof=1)"
    checkpoint_selection: CheckpointSelection = CheckpointSelection.HELD_OUT_FOLD
    selection_biased: bool = Field(
        True, description="the fold that picked each checkpoint also produced its metrics"
    )


class SweepRow(BaseModel):
    k: int
    summary: Dict[str, MetricSummary]


class ExternalTestReport(BaseModel):
    """Every fold checkpoint evaluated on an independent cohort"""
    checkpoints: List[str]
    per_checkpoint: List[MetricsReport]
    summary: Dict[str, MetricSummary]
    per_class_accuracy: List[MetricSummary]


class BenchmarkReport(BaseModel):
    """Interaction benchmark: AUCs and the acceptance flags derived from them"""
    dataset_dir: str
    wikg_auc: Optional[float]
    mean_pool_auc: Optional[float]
    knn_cos_auc: Optional[float]
    knn_dist_auc: Optional[float]
    sweep_auc: Dict[int, Optional[float]]
    seconds: float = Field(..., description="whole run, ablations and sweep included")
    criterion_seconds: float = Field(..., description="dataset generation plus the WiKG and mean-pool cross-validations")
    checks: Dict[str, bool]
