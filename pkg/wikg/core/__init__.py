"""Init file for core module"""
from wikg.core.config import settings, ModelConfig, TrainConfig
from wikg.core.logging import RunAudit, log_run_event

__all__ = [
    "settings",
    "ModelConfig",
    "TrainConfig",
    "RunAudit",
    "log_run_event",
]
