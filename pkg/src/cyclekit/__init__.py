"""Cycle-basis graph neural networks for inductive relation prediction."""

__version__ = "0.1.0"
