"""Tracking-by-detection with online self-supervised descriptor refinement."""

__version__ = "0.1.0"
