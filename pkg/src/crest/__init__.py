"""Adaptive mini-batch coreset selection for SGD training."""

__version__ = "0.1.0"
