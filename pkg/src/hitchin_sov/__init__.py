"""Separation of variables for Hitchin systems of classical type.

Spectral curves over hyperelliptic bases, recovery of the Hamiltonians
from separating divisors, angle differentials and their periods,
Hamiltonian flows, and the product construction for sl(2).
"""

from .errors import EXIT_CODES, HitchinError
from .spectral import SpectralModel, expected_counts
from .sov import SeparatingDivisor, sample_divisor, solve_hamiltonians

__all__ = [
    "EXIT_CODES",
    "HitchinError",
    "SeparatingDivisor",
    "SpectralModel",
    "expected_counts",
    "sample_divisor",
    "solve_hamiltonians",
]

__version__ = "0.1.0"
