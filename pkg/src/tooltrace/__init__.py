"""Deterministic tool-use trajectory environments and finite-context learners."""

__version__ = "0.1.0"
