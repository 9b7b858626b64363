"""Cycle-level simulator and cost explorer for sparse-on-dense accelerators."""

__version__ = "0.1.0"
