"""Exponential Retinex decomposition.

Splits a noisy image into a smooth illumination, a piecewise-constant
reflectance and an oscillating noise layer with an ADMM solver whose linear
subproblems are diagonalized by the FFT.
"""

__version__ = "0.1.0"

from .metrics import QualityReport, mssim, psnr
from .potentials import PotentialSpec
from .solver import (AdmmState, IterationDiagnostics, SolverConfig, SolverDivergence,
                     decompose_outputs, run)

__all__ = [
    "__version__", "QualityReport", "mssim", "psnr", "PotentialSpec", "AdmmState",
    "IterationDiagnostics", "SolverConfig", "SolverDivergence", "decompose_outputs", "run",
]
