"""Deterministic agent-based simulation of a design department."""

__version__ = "0.1.0"
