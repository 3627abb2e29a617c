"""
etreg - Event-triggered robust output regulation simulator.

This package simulates nonlinear output-feedback plants under an
internal-model based regulator whose samples are refreshed only when an
output-based triggering condition fires.
"""

__version__ = "0.1.0"
