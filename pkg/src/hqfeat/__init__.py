"""Hierarchical quantized audio model, token priors, and feature toolbox."""

__version__ = "0.1.0"
