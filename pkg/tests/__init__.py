"""Test package for the regulation simulator."""
