"""Sparse time score matching: estimation and inference for the time
derivative of exponential-family natural parameters."""

__version__ = "0.1.0"
