"""Causality-based safety and termination checking for concurrent transition systems."""

__version__ = "0.1.0"
