"""Probabilistic mission landscapes from uncertain maps and logic rules."""

__version__ = "0.1.0"
