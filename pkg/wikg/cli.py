"""
Command-line entry point: ``python -m wikg <command> [flags]``.

Flags left out keep the lower configuration layer (defaults < --config TOML
< flags). Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

import argparse
import json
import logging
import sys
from typing import List, Optional

from wikg.core.enums import ClassifierInit, EdgePolicy, ModelKind, Precision, Readout
from wikg.core.validation import CommandName
from wikg.tools.command_registry import RUNTIME, execute_command

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# marks published settings in --help
PUBLISHED = "published default"


def _values(enum) -> List[str]:
    return [e.value for e in enum]


def _add_experiment_flags(p: argparse.ArgumentParser, with_k: bool = True) -> None:
    g = p.add_argument_group("experiment")
    g.add_argument("--config", help="TOML file; top-level TrainConfig keys and a [model] table")
    g.add_argument("--model", choices=_values(ModelKind), help="classifier (default wikg)")
    g.add_argument("--policy", choices=_values(EdgePolicy), help="edge construction, wikg only (default wikg)")
    if with_k:
        g.add_argument("--k", type=int, help=f"neighbors per node (default 6, {PUBLISHED})")
    g.add_argument("--d-model", type=int, help=f"embedding size (default 512, {PUBLISHED})")
    g.add_argument("--readout", choices=_values(Readout), help="graph readout (default mean)")
    g.add_argument("--dropout", type=float, help=f"dropout before readout (default 0.3, {PUBLISHED})")
    g.add_argument("--leaky-slope", type=float, help="LeakyReLU negative slope (default 0.2)")
    g.add_argument("--gated-hidden", type=int, help="gated-attention hidden size (default 128)")
    g.add_argument("--exclude-self", action=argparse.BooleanOptionalAction, help="forbid self-edges (default off)")
    g.add_argument("--clamp-k", action=argparse.BooleanOptionalAction, help="clamp k to small bags instead of failing")
    g.add_argument("--classifier-init", choices=_values(ClassifierInit), help="classifier weights (default xavier)")
    g.add_argument("--epochs", type=int, help=f"training epochs (default 100, {PUBLISHED})")
    g.add_argument("--lr", type=float, help=f"Adam learning rate (default 1e-4, {PUBLISHED})")
    g.add_argument("--weight-decay", type=float, help=f"L2 weight decay (default 1e-5, {PUBLISHED})")
    g.add_argument("--decoupled-weight-decay", action=argparse.BooleanOptionalAction, help="AdamW-style decay")
    g.add_argument("--inner-val-folds", type=int, help="select checkpoints on an inner split of the training folds (default: the held-out fold)")
    g.add_argument("--patience", type=int, help="stop after N epochs without a better validation AUC (default: run every epoch)")
    g.add_argument("--seed", type=int, help="seed for init, shuffling and dropout (default 0)")
    g.add_argument("--precision", choices=_values(Precision), help="storage precision (default float32)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wikg",
        description="Dynamic directed-graph bag classifier: data, training, evaluation and checks.",
        argument_default=argparse.SUPPRESS,
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser(CommandName.GEN.value, help="write a synthetic co-occurrence dataset", argument_default=argparse.SUPPRESS)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--bags", type=int, help="number of bags, even (default 400)")
    p.add_argument("--min-instances", type=int, help="smallest bag (default 30)")
    p.add_argument("--max-instances", type=int, help="largest bag (default 80)")
    p.add_argument("--d-in", type=int, help="feature size (default 384)")
    p.add_argument("--sigma", type=float, help="instance noise (default 0.25)")
    p.add_argument("--seed", type=int, help="dataset seed (default 0)")
    p.add_argument("--folds", type=int, help="stratified folds (default 4)")

    for name, help_text in (
        (CommandName.TRAIN, "train on all folds but one, validate on it"),
        (CommandName.CV, "k-fold cross-validation with mean +- std"),
        (CommandName.SWEEP, "cross-validation for each neighbor count"),
    ):
        p = sub.add_parser(name.value, help=help_text, argument_default=argparse.SUPPRESS)
        p.add_argument("--manifest", required=True, help="manifest.csv")
        p.add_argument("--out", help="output directory (default <output_dir>/<command>)")
        _add_experiment_flags(p, with_k=name is not CommandName.SWEEP)
        if name is CommandName.TRAIN:
            p.add_argument("--fold", type=int, help="held-out fold (default 0)")
        else:
            p.add_argument("--folds", type=int, help=f"folds (default 4, {PUBLISHED})")
            p.add_argument("--jobs", type=int, help="folds run in parallel (default 1)")
        if name is CommandName.SWEEP:
            p.add_argument("--k", dest="k_values", help="comma-separated neighbor counts (default 2,4,6,8,10)")

    p = sub.add_parser(CommandName.EVAL.value, help="metrics of a checkpoint", argument_default=argparse.SUPPRESS)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--fold", type=int, help="evaluate one fold (default all records)")
    p.add_argument("--out", help="directory for metrics.json")

    p = sub.add_parser(CommandName.EXTERNAL.value, help="evaluate fold checkpoints on an independent cohort", argument_default=argparse.SUPPRESS)
    p.add_argument("--manifest", required=True, help="manifest of the external cohort")
    p.add_argument("--checkpoints", nargs="+", help="checkpoint files")
    p.add_argument("--cv-dir", help="cross-validation output holding fold_*/checkpoint.wkgc")
    p.add_argument("--out", help="directory for external.json")

    p = sub.add_parser(CommandName.BENCHMARK.value, help="synthetic interaction benchmark with pass/fail checks", argument_default=argparse.SUPPRESS)
    p.add_argument("--out", required=True)
    p.add_argument("--bags", type=int, help="dataset size (default 400)")
    p.add_argument("--sigma", type=float, help="instance noise (default 0.25)")
    p.add_argument("--folds", type=int, help="folds (default 4)")
    p.add_argument("--data-seed", type=int, help="dataset seed (default 0)")
    p.add_argument("--d-in", type=int, help="feature size (default 384)")
    p.add_argument("--k-values", help="neighbor counts to sweep (default 2,4,6,8)")
    p.add_argument("--jobs", type=int, help="folds run in parallel (default 1)")
    _add_experiment_flags(p)

    p = sub.add_parser(CommandName.EXPORT_GRAPH.value, help="write one bag's graph as JSON or DOT", argument_default=argparse.SUPPRESS)
    p.add_argument("--checkpoint", required=True, help="wikg checkpoint")
    p.add_argument("--bag", required=True, help="bag file (.wkgb)")
    p.add_argument("--format", choices=["json", "dot"], help="output format (default json)")
    p.add_argument("--out", help="output file (default <output_dir>/graphs/<bag>.<format>)")
    p.add_argument("--meta-root", help="directory with dataset.json for node labels")

    p = sub.add_parser(CommandName.GRADCHECK.value, help="finite-difference gradient checks", argument_default=argparse.SUPPRESS)
    p.add_argument("--op", help="comma-separated checks to run (default all)")
    p.add_argument("--tol", type=float, help="max relative error (default 1e-5)")
    p.add_argument("--eps", type=float, help="finite-difference step (default 1e-6)")
    p.add_argument("--seeds", type=int, help="random instances per check (default 1)")
    p.add_argument("--out", help="JSON report file")

    p = sub.add_parser(CommandName.SERVE.value, help="run the inference API", argument_default=argparse.SUPPRESS)
    p.add_argument("--checkpoint", help="checkpoint to serve (default WIKG_CHECKPOINT_PATH)")
    p.add_argument("--host", help="bind address (default 127.0.0.1)")
    p.add_argument("--port", type=int, help="port (default 8000)")

    return parser


def _set_verbosity(verbose: bool, quiet: bool) -> None:
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    elif quiet:
        logging.getLogger().setLevel(logging.WARNING)


def main(argv: Optional[List[str]] = None) -> int:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    _set_verbosity(args.pop("verbose", False), args.pop("quiet", False))

    outcome = execute_command(command, args)
    if not outcome["success"]:
        print(f"wikg {command}: {outcome['error']}", file=sys.stderr)
        return EXIT_FAILURE if outcome["error_kind"] == RUNTIME else EXIT_USAGE

    result = outcome["result"]
    print(json.dumps(result, indent=2, default=str))
    if isinstance(result, dict) and result.get("passed") is False:
        return EXIT_FAILURE
    return EXIT_OK
