"""
Unit tests for enums.

Tests the SimStatus, ControllerMode and StabilityVerdict enums for proper
values and string representations.
"""

import pytest
from src.models import ControllerMode, SimStatus, StabilityVerdict


class TestSimStatus:
    """Test cases for the SimStatus enum."""

    def test_sim_status_values(self):
        """Test SimStatus enum has correct values."""
        assert SimStatus.COMPLETED.value == "completed"
        assert SimStatus.ZENO_GUARD.value == "zeno_guard"
        assert SimStatus.MAX_TRIGGERS.value == "max_triggers"

    def test_sim_status_string_representation(self):
        """Test SimStatus string form used in reports."""
        assert str(SimStatus.COMPLETED) == "Completed"
        assert str(SimStatus.ZENO_GUARD) == "ZenoGuard"
        assert str(SimStatus.MAX_TRIGGERS) == "MaxTriggers"

    def test_sim_status_members(self):
        """Test SimStatus has exactly three members."""
        assert len(list(SimStatus)) == 3


class TestControllerMode:
    """Test cases for the ControllerMode enum."""

    def test_lookup_by_value(self):
        """Test modes are constructed from their scenario spelling."""
        assert ControllerMode("continuous") is ControllerMode.CONTINUOUS
        assert ControllerMode("zoh") is ControllerMode.ZOH

    def test_unknown_mode(self):
        """Test an unknown spelling is rejected."""
        with pytest.raises(ValueError):
            ControllerMode("discrete")


class TestStabilityVerdict:
    """Test cases for the StabilityVerdict enum."""

    def test_string_representation(self):
        """Test StabilityVerdict string representation is human-readable."""
        assert str(StabilityVerdict.HURWITZ) == "Hurwitz"
        assert str(StabilityVerdict.UNSTABLE) == "Unstable"
        assert str(StabilityVerdict.MARGINAL) == "Marginal"

    def test_equality(self):
        """Test StabilityVerdict equality comparisons."""
        assert StabilityVerdict.HURWITZ == StabilityVerdict.HURWITZ
        assert StabilityVerdict.HURWITZ != StabilityVerdict.MARGINAL
