"""Planar self-similar measures, random models, dyadic entropy and Fourier-decay tools."""
from __future__ import annotations

__version__ = "0.1.0"
