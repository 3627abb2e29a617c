"""
Utility modules for the regulation simulator.

This package contains the dense linear-algebra kernel, run metrics and
coordinate-chain diagnostics, scenario ingestion and CSV reporting.
"""

from .matlib import expm, is_hurwitz, solve_sylvester, zoh_discretize

__all__ = [
    "expm",
    "is_hurwitz",
    "solve_sylvester",
    "zoh_discretize"
]
