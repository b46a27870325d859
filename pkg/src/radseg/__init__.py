"""Interleaved radar pulse segmentation: synthesis, from-scratch 1D networks, evaluation."""

__version__ = "0.1.0"
