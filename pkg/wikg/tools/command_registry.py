"""
Command execution registry with argument validation.
This is the ONLY place where commands are executed.
All calls go through validation first.
"""

import time
from typing import Any, Dict, Optional

from pydantic import ValidationError

from wikg.core.errors import UsageError
from wikg.core.logging import RunAudit, log_run_event
from wikg.core.validation import parse_command_args
from wikg.tools.dataset_tools import cmd_gen
from wikg.tools.diagnostic_tools import cmd_gradcheck
from wikg.tools.graph_tools import cmd_export_graph
from wikg.tools.service_tools import cmd_serve
from wikg.tools.training_tools import (
    cmd_benchmark,
    cmd_cv,
    cmd_eval,
    cmd_external,
    cmd_sweep,
    cmd_train,
)

AVAILABLE_COMMANDS = {
    # Data
    "gen": cmd_gen,
    # Training and evaluation
    "train": cmd_train,
    "eval": cmd_eval,
    "cv": cmd_cv,
    "sweep": cmd_sweep,
    "external": cmd_external,
    "benchmark": cmd_benchmark,
    # Inspection
    "export-graph": cmd_export_graph,
    "gradcheck": cmd_gradcheck,
    # Service
    "serve": cmd_serve,
}

# error_kind values; the CLI maps "validation" and "usage" to exit code 2
VALIDATION = "validation"
USAGE = "usage"
RUNTIME = "runtime"


def execute_command(command: str, args: Optional[Dict[str, Any]] = None) -> dict:
    """
    Execute a command with full argument validation.

    Args:
        command: The name of the command to execute
        args: Dictionary of arguments for the command

    Returns:
        Dictionary with the result of command execution
    """
    if args is None:
        args = {}

    start_time = time.time()

    # STEP 1: Validate against the whitelist and the argument schema
    try:
        name, parsed = parse_command_args(command, args)
    except ValueError as e:
        error_msg = str(e)
        log_run_event(
            event_type="command_rejected",
            description=f"Command rejected: {error_msg}",
            severity="WARNING"
        )
        RunAudit.log_command_rejection(command, error_msg, args)
        return {
            "success": False,
            "command": command,
            "error": error_msg,
            "error_kind": VALIDATION
        }

    # STEP 2: Log the call
    RunAudit.log_command_call(command, args)

    # STEP 3: Execute
    try:
        result = AVAILABLE_COMMANDS[name.value](parsed)

        execution_time = (time.time() - start_time) * 1000
        RunAudit.log_command_result(
            command,
            success=True,
            result=result,
            execution_time_ms=execution_time
        )

        return {
            "success": True,
            "command": command,
            "result": result
        }

    except Exception as e:
        execution_time = (time.time() - start_time) * 1000
        error_str = str(e)
        # merged TOML values are validated only once the run configuration is built
        kind = USAGE if isinstance(e, (UsageError, ValidationError)) else RUNTIME

        log_run_event(
            event_type="command_execution_error",
            description=f"Command '{command}' failed: {type(e).__name__}: {error_str}",
            severity="ERROR"
        )

        RunAudit.log_command_result(
            command,
            success=False,
            result=None,
            error=error_str,
            execution_time_ms=execution_time
        )

        return {
            "success": False,
            "command": command,
            "error": f"{type(e).__name__}: {error_str}",
            "error_kind": kind
        }
