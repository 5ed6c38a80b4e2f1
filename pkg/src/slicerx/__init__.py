"""Simulator and equalizers for spectrally sliced IM-DD optical receivers."""

from . import channel, equalizers, frontend, harness, metrics, sigkit

__version__ = "0.1.0"

__all__ = ["sigkit", "channel", "frontend", "equalizers", "metrics", "harness", "__version__"]
