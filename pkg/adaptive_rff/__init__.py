"""Adaptive random Fourier features - resampling, solvers, oracles and CLI."""

__version__ = "0.1.0"

from adaptive_rff.cli import main
from adaptive_rff.linalg import solve
from adaptive_rff.rng import RngStream
from adaptive_rff.trainer import run

__all__ = ["RngStream", "main", "run", "solve"]
