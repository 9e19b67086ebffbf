"""Efficient LPCNet-style neural vocoder inference and weight quantization."""

__version__ = "0.1.0"
