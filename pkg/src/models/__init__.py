"""
Data models and enums for the regulation simulator.

This package contains the value types used throughout the application
(controller states, latches, run configuration and results) together with
the plant and exosystem/internal-model definitions. Only the dependency-free
types are re-exported here.
"""

from .data_models import (
    ClosedLoopState,
    ControllerState,
    InitialConditions,
    Latched,
    Metrics,
    SimConfig,
    SimResult,
    TriggerRecord,
)
from .enums import ControllerMode, SimStatus, StabilityVerdict

__all__ = [
    "ClosedLoopState",
    "ControllerState",
    "InitialConditions",
    "Latched",
    "Metrics",
    "SimConfig",
    "SimResult",
    "TriggerRecord",
    "ControllerMode",
    "SimStatus",
    "StabilityVerdict",
]
