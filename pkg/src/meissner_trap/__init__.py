"""Flux-concentrator Meissner trap simulation and NV magnetometry analysis."""

__version__ = "0.1.0"
