"""
Command whitelist and argument validation.
These are the ONLY commands the CLI and the registry will run.
"""

from enum import Enum
from typing import Any, Dict, Tuple, Type

from pydantic import ValidationError

from wikg.schemas.commands import (
    BenchmarkArgs,
    CommandArgs,
    CrossValidateArgs,
    EvalArgs,
    ExportGraphArgs,
    ExternalArgs,
    GenArgs,
    GradcheckArgs,
    ServeArgs,
    SweepArgs,
    TrainArgs,
)


class CommandName(str, Enum):
    """Whitelist of commands."""

    GEN = "gen"
    TRAIN = "train"
    EVAL = "eval"
    CV = "cv"
    SWEEP = "sweep"
    EXPORT_GRAPH = "export-graph"
    GRADCHECK = "gradcheck"
    EXTERNAL = "external"
    BENCHMARK = "benchmark"
    SERVE = "serve"


# Map command names to their argument schemas
COMMAND_SCHEMAS: Dict[CommandName, Type[CommandArgs]] = {
    CommandName.GEN: GenArgs,
    CommandName.TRAIN: TrainArgs,
    CommandName.EVAL: EvalArgs,
    CommandName.CV: CrossValidateArgs,
    CommandName.SWEEP: SweepArgs,
    CommandName.EXPORT_GRAPH: ExportGraphArgs,
    CommandName.GRADCHECK: GradcheckArgs,
    CommandName.EXTERNAL: ExternalArgs,
    CommandName.BENCHMARK: BenchmarkArgs,
    CommandName.SERVE: ServeArgs,
}


def _describe(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        where = ".".join(str(p) for p in item["loc"])
        parts.append(f"{where}: {item['msg']}" if where else item["msg"])
    return "; ".join(parts)


def parse_command_args(command: str, args: Dict[str, Any]) -> Tuple[CommandName, CommandArgs]:
    """Whitelisted name and validated arguments; raises ``ValueError`` otherwise."""
    try:
        name = CommandName(command)
    except ValueError:
        raise ValueError(
            f"Command '{command}' not in whitelist. Available: {[c.value for c in CommandName]}"
        ) from None
    try:
        return name, COMMAND_SCHEMAS[name](**args)
    except ValidationError as e:
        raise ValueError(f"Invalid arguments for '{command}': {_describe(e)}") from None


def validate_command(command: str, args: Dict[str, Any]) -> Tuple[bool, str]:
    """
    Validate a command request.

    Returns:
        (is_valid, error_message)
    """
    try:
        parse_command_args(command, args)
    except ValueError as e:
        return False, str(e)
    return True, ""
