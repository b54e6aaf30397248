"""
Training loop, evaluation, cross-validation, neighbor sweeps and
external-cohort evaluation.

Artifacts of a cross-validation run under ``out_dir``:
    fold_<i>/checkpoint.wkgc   best-validation-AUC parameters
    fold_<i>/epochs.csv        epoch,train_loss,val_auc,seconds
    fold_<i>/train.json        TrainResult
    fold_<i>/metrics.json      MetricsReport of the best checkpoint
    cv_summary.json            CrossValidationSummary
"""

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np

from wikg.core.config import ModelConfig, TrainConfig
from wikg.core.enums import CheckpointSelection, Mode
from wikg.core.errors import DimensionError, ParameterError
from wikg.core.logging import RunAudit, log_run_event, logger
from wikg.engine import ops
from wikg.engine.rng import derive_rng
from wikg.engine.tensor import Tape, no_tape, precision
from wikg.schemas.dataset import DatasetManifest, ManifestRecord
from wikg.schemas.reports import (
    CrossValidationSummary,
    EpochRecord,
    ExternalTestReport,
    FoldResult,
    MetricsReport,
    SweepRow,
    TrainResult,
)
from wikg.services.checkpoint_service import load_checkpoint, save_checkpoint
from wikg.services.classifier_service import BagClassifier, build_classifier, model_dtype
from wikg.services.data_service import (
    Bag,
    assign_folds,
    kfold_split,
    load_bags,
    read_bag_header,
    resolve_bag_path,
)
from wikg.services.metrics_service import (
    SUMMARY_METRICS,
    compute_metrics,
    summarize_per_class,
    summarize_reports,
)
from wikg.services.model_service import param_count
from wikg.services.optim_service import AdamState, adam_step

PathLike = Union[str, Path]

CHECKPOINT_NAME = "checkpoint.wkgc"
EPOCH_LOG_NAME = "epochs.csv"
EPOCH_LOG_HEADER = ["epoch", "train_loss", "val_auc", "seconds"]


def predict_probabilities(model: BagClassifier, bags: Sequence[Bag]) -> np.ndarray:
    """Eval-mode class probabilities, one row per bag."""
    with no_tape():
        return np.stack([ops.softmax_probabilities(model.forward(bag, Mode.EVAL)) for bag in bags])


def evaluate_model(model: BagClassifier, bags: Sequence[Bag]) -> MetricsReport:
    probabilities = predict_probabilities(model, bags)
    return compute_metrics([bag.label for bag in bags], probabilities)


def write_epoch_log(path: PathLike, history: Sequence[EpochRecord]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(EPOCH_LOG_HEADER)
        for r in history:
            writer.writerow([r.epoch, repr(r.train_loss), "" if r.val_auc is None else repr(r.val_auc), f"{r.seconds:.6f}"])
    return path


def train_step(model: BagClassifier, bag: Bag, config: TrainConfig, state: AdamState, rng: np.random.Generator) -> float:
    """One bag forward, backward and Adam update. Returns the loss."""
    tensors = model.named_tensors()
    for t in tensors.values():
        t.zero_grad()
    with Tape() as tape:
        logits = model.forward(bag, Mode.TRAIN, rng)
        loss = ops.cross_entropy(logits, bag.label)
    tape.backward(loss)
    adam_step(
        {name: t.data for name, t in tensors.items()},
        {name: t.grad for name, t in tensors.items()},
        state,
        config,
    )
    return loss.item()


def fit(
    model: BagClassifier,
    train_bags: Sequence[Bag],
    val_bags: Sequence[Bag],
    config: TrainConfig,
    run_dir: PathLike,
    run: str = "run",
    stream: int = 0,
) -> TrainResult:
    """
    Train one bag per step in a freshly shuffled order each epoch and keep
    the checkpoint with the best validation AUC (the last epoch when no
    validation AUC is available).
    """
    if not train_bags:
        raise ParameterError("training set is empty")
    run_dir = Path(run_dir)
    checkpoint_path = run_dir / CHECKPOINT_NAME
    state = AdamState()
    history: List[EpochRecord] = []
    best_epoch, best_auc = 0, None

    for epoch in range(1, config.epochs + 1):
        start = time.perf_counter()
        order = derive_rng(config.seed, "shuffle", stream, epoch).permutation(len(train_bags))
        dropout_rng = derive_rng(config.seed, "dropout", stream, epoch)
        losses = [train_step(model, train_bags[i], config, state, dropout_rng) for i in order]
        val_auc = evaluate_model(model, val_bags).auc if val_bags else None
        seconds = time.perf_counter() - start

        record = EpochRecord(epoch=epoch, train_loss=float(np.mean(losses)), val_auc=val_auc, seconds=seconds)
        history.append(record)
        RunAudit.log_epoch(run, epoch, record.train_loss, val_auc, seconds)

        if val_auc is None:
            # no validation signal yet: keep the latest parameters
            improved = best_auc is None
        else:
            improved = best_auc is None or val_auc > best_auc
        if improved:
            best_epoch, best_auc = epoch, val_auc
            save_checkpoint(checkpoint_path, model)
            RunAudit.log_checkpoint(run, str(checkpoint_path), epoch, val_auc)
        if config.patience and best_auc is not None and epoch - best_epoch >= config.patience:
            logger.info(f"{run}: no better validation AUC for {config.patience} epochs, stopping at epoch {epoch}")
            break

    log_path = write_epoch_log(run_dir / EPOCH_LOG_NAME, history)
    result = TrainResult(
        run=run,
        checkpoint_path=str(checkpoint_path),
        log_path=str(log_path),
        best_epoch=best_epoch,
        best_val_auc=best_auc,
        param_count=param_count(model),
        mean_epoch_seconds=float(np.mean([r.seconds for r in history])),
        history=history,
        stopped_early=len(history) < config.epochs,
    )
    (run_dir / "train.json").write_text(result.model_dump_json(indent=2), encoding="utf-8")
    return result


def split_fold(manifest: DatasetManifest, fold: int):
    """Records of the held-out fold and of all other folds."""
    if fold not in manifest.folds:
        raise ParameterError(f"fold {fold} not in manifest folds {manifest.folds}")
    held_out = [r for r in manifest.records if r.fold == fold]
    rest = [r for r in manifest.records if r.fold != fold]
    return rest, held_out


def _check_dims(model: ModelConfig, manifest: DatasetManifest, source: str = "model") -> None:
    if model.d_in != manifest.d_in:
        raise DimensionError(f"{source} expects D_in={model.d_in}, manifest bags have {manifest.d_in}")
    if model.n_classes < manifest.n_classes:
        raise DimensionError(f"{source} has {model.n_classes} classes, manifest has {manifest.n_classes}")


def inner_validation_split(records: Sequence[ManifestRecord], folds: int, seed: int, fold: int):
    """Stratified split of training records; inner fold 0 validates."""
    inner_seed = int(derive_rng(seed, "inner_split", fold).integers(2**31))
    inner = kfold_split([r.label for r in records], folds, inner_seed)
    train_records = [r for r, f in zip(records, inner) if f != 0]
    val_records = [r for r, f in zip(records, inner) if f == 0]
    return train_records, val_records


def train(manifest: DatasetManifest, fold: int, config: TrainConfig, out_dir: PathLike) -> TrainResult:
    """
    Train on every fold except ``fold``. Checkpoints are selected on
    ``fold`` itself, or on an inner stratified split of the training bags
    when ``config.inner_val_folds`` is set.
    """
    _check_dims(config.model, manifest)
    train_records, val_records = split_fold(manifest, fold)
    if not train_records:
        raise ParameterError(f"no training bags outside fold {fold}")
    selection = CheckpointSelection.HELD_OUT_FOLD
    if config.inner_val_folds is not None:
        train_records, val_records = inner_validation_split(train_records, config.inner_val_folds, config.seed, fold)
        selection = CheckpointSelection.INNER_SPLIT
    with precision(config.precision):
        train_bags = load_bags(manifest, train_records)
        val_bags = load_bags(manifest, val_records)
        model = build_classifier(config.model, derive_rng(config.seed, "init", fold))
        logger.info(
            f"Training {config.model.kind.value} on fold {fold}: "
            f"{len(train_bags)} train / {len(val_bags)} val bags, {param_count(model)} parameters"
        )
        result = fit(model, train_bags, val_bags, config, out_dir, run=f"fold_{fold}", stream=fold)
    result.selection = selection
    (Path(out_dir) / "train.json").write_text(result.model_dump_json(indent=2), encoding="utf-8")
    return result


def evaluate(checkpoint: PathLike, manifest: DatasetManifest, fold: Optional[int] = None) -> MetricsReport:
    """Metrics of a saved model on ``fold`` (every record when ``fold`` is None)."""
    model = load_checkpoint(checkpoint)
    _check_dims(model.config, manifest, source="checkpoint")
    records = manifest.records if fold is None else split_fold(manifest, fold)[1]
    with precision(model_dtype(model)):
        return evaluate_model(model, load_bags(manifest, records))


def _run_fold(manifest: DatasetManifest, fold: int, config: TrainConfig, out_dir: str) -> FoldResult:
    fold_dir = Path(out_dir) / f"fold_{fold}"
    result = train(manifest, fold, config, fold_dir)
    metrics = evaluate(result.checkpoint_path, manifest, fold)
    (fold_dir / "metrics.json").write_text(metrics.model_dump_json(indent=2), encoding="utf-8")
    return FoldResult(fold=fold, train=result, metrics=metrics)


def _resolve_folds(manifest: DatasetManifest, folds: Optional[int], seed: int) -> DatasetManifest:
    present = manifest.folds
    if folds is None or present == list(range(folds)):
        return manifest
    if len(present) == 1:
        log_run_event(
            event_type="folds_assigned",
            description=f"manifest has no fold split; assigning {folds} stratified folds with seed {seed}",
            severity="INFO",
        )
        return assign_folds(manifest, folds, seed)
    raise ParameterError(f"manifest folds {present} do not match --folds {folds}")


def cross_validate(
    manifest: DatasetManifest,
    folds: Optional[int],
    config: TrainConfig,
    out_dir: PathLike,
    jobs: int = 1,
) -> CrossValidationSummary:
    """Train and evaluate each fold; report per-fold metrics and mean +- sample std."""
    manifest = _resolve_folds(manifest, folds, config.seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fold_ids = manifest.folds

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_fold, manifest, f, config, str(out_dir)) for f in fold_ids]
            results = [future.result() for future in futures]
    else:
        results = [_run_fold(manifest, f, config, str(out_dir)) for f in fold_ids]

    selection = CheckpointSelection.HELD_OUT_FOLD if config.inner_val_folds is None else CheckpointSelection.INNER_SPLIT
    summary = CrossValidationSummary(
        model=config.model,
        folds=results,
        summary=summarize_reports([r.metrics for r in results]),
        checkpoint_selection=selection,
        selection_biased=selection is CheckpointSelection.HELD_OUT_FOLD,
    )
    if summary.selection_biased:
        log_run_event(
            event_type="selection_biased",
            description="checkpoints were picked on the evaluated fold; set inner_val_folds for an unbiased estimate",
            severity="INFO",
        )
    (out_dir / "cv_summary.json").write_text(summary.model_dump_json(indent=2), encoding="utf-8")
    auc = summary.summary["auc"]
    logger.info(f"Cross-validation done: AUC {auc.mean} +- {auc.std} over {len(results)} folds")
    return summary


def min_bag_size(manifest: DatasetManifest) -> int:
    root = manifest.root or "."
    return min(read_bag_header(resolve_bag_path(root, r.bag_path))[0] for r in manifest.records)


def write_sweep_csv(path: PathLike, rows: Sequence[SweepRow]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["k"] + [f"{m}_{s}" for m in SUMMARY_METRICS for s in ("mean", "std")])
        for row in rows:
            cells = []
            for m in SUMMARY_METRICS:
                summary = row.summary[m]
                cells += ["" if summary.mean is None else repr(summary.mean), "" if summary.std is None else repr(summary.std)]
            writer.writerow([row.k] + cells)
    return path


def neighbor_sweep(
    manifest: DatasetManifest,
    config: TrainConfig,
    k_values: Sequence[int],
    out_dir: PathLike,
    folds: Optional[int] = None,
    jobs: int = 1,
) -> List[SweepRow]:
    """One cross-validation per k; writes ``sweep.csv``."""
    if not k_values:
        raise ParameterError("k_values is empty")
    smallest = min_bag_size(manifest)
    limit = smallest - 1 if config.model.exclude_self else smallest
    if max(k_values) > limit and not config.model.clamp_k:
        raise ParameterError(f"k={max(k_values)} exceeds the smallest bag ({smallest} instances); enable clamp_k")
    out_dir = Path(out_dir)
    rows = []
    for k in k_values:
        k_config = config.model_copy(update={"model": config.model.model_copy(update={"k": k})})
        summary = cross_validate(manifest, folds, k_config, out_dir / f"k_{k}", jobs=jobs)
        rows.append(SweepRow(k=k, summary=summary.summary))
    write_sweep_csv(out_dir / "sweep.csv", rows)
    return rows


def evaluate_external(checkpoints: Sequence[PathLike], manifest: DatasetManifest) -> ExternalTestReport:
    """Evaluate every checkpoint on every bag of an independent manifest."""
    if not checkpoints:
        raise ParameterError("no checkpoints given")
    reports = [evaluate(path, manifest, None) for path in checkpoints]
    return ExternalTestReport(
        checkpoints=[str(p) for p in checkpoints],
        per_checkpoint=reports,
        summary=summarize_reports(reports),
        per_class_accuracy=summarize_per_class(reports),
    )
