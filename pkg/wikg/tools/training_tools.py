from pathlib import Path
from typing import List, Optional

from wikg.core.config import settings
from wikg.core.logging import logger
from wikg.schemas.commands import (
    BenchmarkArgs,
    CrossValidateArgs,
    EvalArgs,
    ExternalArgs,
    ManifestArgs,
    SweepArgs,
    TrainArgs,
)
from wikg.schemas.dataset import DatasetManifest
from wikg.services.benchmark_service import BENCHMARK_PATIENCE, run_benchmark
from wikg.services.data_service import read_manifest
from wikg.services.metrics_service import format_summary_table
from wikg.services.train_service import (
    CHECKPOINT_NAME,
    cross_validate,
    evaluate,
    evaluate_external,
    neighbor_sweep,
    train,
)


def _out_dir(out: Optional[str], command: str) -> Path:
    return Path(out) if out else Path(settings.output_dir) / command


def _write_json(out: Optional[str], name: str, text: str) -> Optional[str]:
    if not out:
        return None
    path = Path(out) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return str(path)


def _load(args: ManifestArgs):
    """Manifest plus the run configuration; bag dims fill in unless overridden."""
    manifest = read_manifest(args.manifest)
    config = args.train_config({"model": {"d_in": manifest.d_in, "n_classes": manifest.n_classes}})
    return manifest, config


def cmd_train(args: TrainArgs) -> dict:
    manifest, config = _load(args)
    result = train(manifest, args.fold, config, _out_dir(args.out, "train"))
    return result.model_dump(mode="json", exclude={"history"})


def cmd_eval(args: EvalArgs) -> dict:
    report = evaluate(args.checkpoint, read_manifest(args.manifest), args.fold)
    _write_json(args.out, "metrics.json", report.model_dump_json(indent=2))
    return report.model_dump(mode="json")


def cmd_cv(args: CrossValidateArgs) -> dict:
    manifest, config = _load(args)
    out = _out_dir(args.out, "cv")
    summary = cross_validate(manifest, args.folds, config, out, jobs=args.jobs)
    table = format_summary_table(summary.summary)
    (out / "cv_summary.txt").write_text(table + "\n", encoding="utf-8")
    logger.info("Cross-validation summary\n" + table)
    return {
        "out": str(out),
        "summary": {name: s.model_dump() for name, s in summary.summary.items()},
        "table": table,
    }


def cmd_sweep(args: SweepArgs) -> dict:
    manifest, config = _load(args)
    out = _out_dir(args.out, "sweep")
    rows = neighbor_sweep(manifest, config, args.k_values, out, folds=args.folds, jobs=args.jobs)
    return {"csv": str(out / "sweep.csv"), "rows": [row.model_dump(mode="json") for row in rows]}


def _cv_checkpoints(cv_dir: str) -> List[str]:
    found = sorted(Path(cv_dir).glob(f"fold_*/{CHECKPOINT_NAME}"))
    if not found:
        raise FileNotFoundError(f"no fold_*/{CHECKPOINT_NAME} under {cv_dir}")
    return [str(p) for p in found]


def cmd_external(args: ExternalArgs) -> dict:
    """Evaluate every fold checkpoint on an independent cohort."""
    checkpoints = args.checkpoints or _cv_checkpoints(args.cv_dir)
    manifest: DatasetManifest = read_manifest(args.manifest)
    report = evaluate_external(checkpoints, manifest)
    _write_json(args.out, "external.json", report.model_dump_json(indent=2))
    return report.model_dump(mode="json")


def cmd_benchmark(args: BenchmarkArgs) -> dict:
    config = args.train_config({"model": {"d_in": args.d_in}, "patience": BENCHMARK_PATIENCE})
    report = run_benchmark(
        args.out,
        config,
        n_bags=args.bags,
        noise_sigma=args.sigma,
        folds=args.folds,
        data_seed=args.data_seed,
        k_values=args.k_values,
        jobs=args.jobs,
    )
    return report.model_dump(mode="json")
