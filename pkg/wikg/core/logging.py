"""
Logging and auditing for command execution and training runs.
Every event is a single JSON object on the audit logger.
"""

import json
import logging
from datetime import datetime, timezone
from typing import Any, Dict, Optional

from wikg.core.config import settings

# Configure logging
logging.basicConfig(
    level=settings.log_level,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

logger = logging.getLogger("wikg")
audit_logger = logging.getLogger("audit")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class RunAudit:
    """Audit log for commands, epochs and checkpoints"""

    @staticmethod
    def log_command_call(
        command: str,
        args: Dict[str, Any],
        metadata: Optional[Dict] = None
    ):
        """Log when a command is called"""
        if not settings.enable_command_auditing:
            return

        audit_entry = {
            "timestamp": _now(),
            "event": "command_call",
            "command": command,
            "args": args,
            "metadata": metadata or {}
        }

        audit_logger.info(json.dumps(audit_entry, default=str))

    @staticmethod
    def log_command_result(
        command: str,
        success: bool,
        result: Any,
        error: Optional[str] = None,
        execution_time_ms: float = 0
    ):
        """Log when a command completes"""
        if not settings.enable_command_auditing:
            return

        audit_entry = {
            "timestamp": _now(),
            "event": "command_result",
            "command": command,
            "success": success,
            "error": error,
            "execution_time_ms": round(execution_time_ms, 3)
        }

        # Results can be large (per-epoch histories); log only the type
        if success:
            audit_entry["result_type"] = type(result).__name__

        audit_logger.info(json.dumps(audit_entry))

    @staticmethod
    def log_command_rejection(
        command: str,
        reason: str,
        args: Dict[str, Any]
    ):
        """Log when a command is rejected by validation"""
        audit_entry = {
            "timestamp": _now(),
            "event": "command_rejected",
            "command": command,
            "reason": reason,
            "args": args
        }

        logger.warning(json.dumps(audit_entry, default=str))

    @staticmethod
    def log_epoch(
        run: str,
        epoch: int,
        train_loss: float,
        val_auc: Optional[float],
        seconds: float
    ):
        """Log one completed training epoch"""
        if not settings.log_run_events:
            return

        audit_entry = {
            "timestamp": _now(),
            "event": "epoch_completed",
            "run": run,
            "epoch": epoch,
            "train_loss": train_loss,
            "val_auc": val_auc,
            "seconds": round(seconds, 4)
        }

        audit_logger.info(json.dumps(audit_entry))

    @staticmethod
    def log_checkpoint(run: str, path: str, epoch: int, val_auc: Optional[float]):
        """Log when a checkpoint is written"""
        if not settings.log_run_events:
            return

        audit_entry = {
            "timestamp": _now(),
            "event": "checkpoint_saved",
            "run": run,
            "path": path,
            "epoch": epoch,
            "val_auc": val_auc
        }

        audit_logger.info(json.dumps(audit_entry))


def log_run_event(
    event_type: str,
    description: str,
    severity: str = "WARNING"
):
    """Log noteworthy numeric or data events (clamped k, undefined AUC...)"""
    entry = {
        "timestamp": _now(),
        "event_type": event_type,
        "description": description,
        "severity": severity
    }

    if severity == "ERROR":
        logger.error(json.dumps(entry))
    elif severity == "WARNING":
        logger.warning(json.dumps(entry))
    else:
        logger.info(json.dumps(entry))
