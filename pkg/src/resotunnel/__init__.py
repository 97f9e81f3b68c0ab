"""Resonance-chain tunneling toolkit.

Builds integrable resonance-chain Hamiltonians, computes exact level
splittings by torus quantization, and reproduces them semiclassically from
real/complex classical trajectories.
"""

from .model import ModelParams

__all__ = ["ModelParams"]
__version__ = "0.1.0"
