"""
Enums for the event-triggered regulation simulator.

This module defines the enumeration types shared across the package for
stability verdicts, simulation outcomes and controller implementation modes.
"""

from enum import Enum


class StabilityVerdict(Enum):
    """Outcome of a Routh-table stability test.

    - HURWITZ: all eigenvalues strictly in the open left half-plane
    - UNSTABLE: at least one eigenvalue in the open right half-plane
    - MARGINAL: a Routh pivot is numerically zero (imaginary-axis roots or worse)
    """
    HURWITZ = "hurwitz"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"

    def __str__(self) -> str:
        """Return human-readable string representation."""
        return self.value.title()


class SimStatus(Enum):
    """How a closed-loop simulation run terminated."""
    COMPLETED = "completed"
    ZENO_GUARD = "zeno_guard"
    MAX_TRIGGERS = "max_triggers"

    def __str__(self) -> str:
        """Return the CamelCase name used in reports and diagnostics."""
        return "".join(part.title() for part in self.value.split("_"))


class ControllerMode(Enum):
    """How the controller states are propagated between events.

    - CONTINUOUS: (eta, xi_hat) integrated with the plant by RK4
    - ZOH: exact zero-order-hold update of the digital implementation
    """
    CONTINUOUS = "continuous"
    ZOH = "zoh"
